//! Synthetic fixtures shaped after the São Paulo state case studies.

use chrono::{Days, NaiveDate};
use covradar_core::case_series::{neighborhood_aggregate, windowed_curve, CaseTable, TimeWindow};
use covradar_core::geo_index::{NeighborhoodConfig, NeighborhoodIndex};
use covradar_core::ingest::{build_snapshot, CityName, CityRecord, DailyCaseRow};
use covradar_core::risk_model::{
    build_glyph, compare_city_vs_neighborhood, format_isolation, NormalizationMode,
};

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

struct World {
    table: CaseTable,
    index: NeighborhoodIndex,
}

/// `cities` are (name, lat, lon); `cases` are (name, date, count).
fn world(cities: &[(&str, f64, f64)], cases: &[(&str, &str, i64)], k: usize) -> World {
    let records: Vec<CityRecord> = cities
        .iter()
        .map(|(n, lat, lon)| CityRecord::new(CityName::new(n), *lat, *lon, None).unwrap())
        .collect();
    let mut rows: Vec<DailyCaseRow> = cases
        .iter()
        .map(|(c, date, n)| DailyCaseRow {
            city: CityName::new(c),
            date: d(date),
            new_cases: *n,
        })
        .collect();
    // pin the data range to the study period
    for date in ["2020-02-27", "2020-05-31"] {
        rows.push(DailyCaseRow {
            city: records[0].name.clone(),
            date: d(date),
            new_cases: 0,
        });
    }
    let snap = build_snapshot(records.clone(), rows, vec![], vec![]).unwrap();
    World {
        table: CaseTable::from_snapshot(&snap.snapshot),
        index: NeighborhoodIndex::build(&records, NeighborhoodConfig::new(k).unwrap()).unwrap(),
    }
}

fn pp_region() -> Vec<(&'static str, f64, f64)> {
    vec![
        ("Presidente Prudente", -22.12, -51.39),
        ("Martinópolis", -22.15, -51.17),
        ("Alfredo Marcondes", -21.95, -51.41),
        ("Álvares Machado", -22.08, -51.47),
        ("Regente Feijó", -22.22, -51.30),
        ("Pirapozinho", -22.28, -51.50),
        ("Caiabu", -22.01, -51.24),
    ]
}

#[test]
fn focus_gains_exactly_one_case_in_window() {
    let w = world(
        &pp_region(),
        &[
            ("Martinópolis", "2020-04-02", 2),
            ("Martinópolis", "2020-04-20", 1),
            ("Martinópolis", "2020-05-04", 1),
        ],
        3,
    );
    let window = TimeWindow::new(d("2020-04-26"), d("2020-05-16")).unwrap();
    let curve = windowed_curve(w.table.series(&"Martinópolis".into()).unwrap(), window).unwrap();
    assert_eq!(curve.n_b, 1);
    assert_eq!(curve.n_a, 0);
    assert_eq!(
        w.table
            .cumulative_at(&"Martinópolis".into(), d("2020-05-16")),
        4
    );
}

#[test]
fn five_neighbors_total_sixteen() {
    let region = [
        ("Santa Gertrudes", -22.46, -47.53),
        ("Rio Claro", -22.41, -47.56),
        ("Cordeirópolis", -22.48, -47.45),
        ("Iracemápolis", -22.58, -47.52),
        ("Limeira", -22.56, -47.40),
        ("Araras", -22.36, -47.38),
    ];
    let totals = [2, 3, 4, 3, 4];
    let mut cases = Vec::new();
    for ((name, ..), t) in region[1..].iter().zip(totals) {
        cases.push((*name, "2020-03-25", t - 1));
        cases.push((*name, "2020-04-10", 1));
    }
    let w = world(&region, &cases, 5);
    let window = TimeWindow::new(d("2020-03-23"), d("2020-04-12")).unwrap();
    let bundle =
        compare_city_vs_neighborhood(&"Santa Gertrudes".into(), &w.table, &w.index, window)
            .unwrap();
    assert_eq!(bundle.neighbors.len(), 5);
    assert_eq!(bundle.neighborhood_window_total, 16);

    let members: Vec<CityName> = region[1..].iter().map(|c| CityName::new(c.0)).collect();
    let agg = neighborhood_aggregate(&members, &w.table, window).unwrap();
    assert_eq!(agg.curve.n_b, 16);
    assert!(!agg.empty_neighborhood);

    let single = neighborhood_aggregate(&members[..1], &w.table, window).unwrap();
    let alone = windowed_curve(w.table.series(&members[0]).unwrap(), window).unwrap();
    assert_eq!(single.curve, alone);
}

#[test]
fn regional_city_dominates_its_neighborhood() {
    let mut cases = vec![
        ("Presidente Prudente", "2020-03-20", 9),
        ("Presidente Prudente", "2020-05-01", 80),
        ("Martinópolis", "2020-05-02", 10),
        ("Álvares Machado", "2020-05-03", 12),
        ("Regente Feijó", "2020-05-04", 8),
    ];
    let w = world(&pp_region(), &cases, 6);
    let window = TimeWindow::new(d("2020-04-27"), d("2020-05-16")).unwrap();
    let focus = CityName::new("Presidente Prudente");
    assert_eq!(w.table.cumulative_at(&focus, d("2020-05-16")), 89);
    let b = compare_city_vs_neighborhood(&focus, &w.table, &w.index, window).unwrap();
    assert_eq!(b.city_window_total, 80);
    assert_eq!(b.neighborhood_window_total, 30);
    assert!(b.city_dominates);
    assert_eq!(b.city_whole_period.last().unwrap().value, 89);
    assert_eq!(b.city_whole_period.first().unwrap().date, d("2020-02-27"));

    // equal totals do not count as domination
    cases[1].2 = 30;
    let w = world(&pp_region(), &cases, 6);
    let b = compare_city_vs_neighborhood(&focus, &w.table, &w.index, window).unwrap();
    assert_eq!(b.city_window_total, b.neighborhood_window_total);
    assert!(!b.city_dominates);
}

#[test]
fn isolated_city_without_active_neighbors() {
    let w = world(
        &pp_region(),
        &[
            ("Alfredo Marcondes", "2020-05-10", 2),
            ("Caiabu", "2020-05-20", 3),
        ],
        2,
    );
    let window = TimeWindow::new(d("2020-04-27"), d("2020-05-16")).unwrap();
    let focus = CityName::new("Alfredo Marcondes");
    let g = build_glyph(
        &focus,
        &w.table,
        &w.index,
        window,
        NormalizationMode::UnitSquare,
    )
    .unwrap();
    assert!(g.segments.is_empty());
    assert_eq!(g.focus.window_total, 2);
    assert_eq!(g.focus.score.saturation, 1.0);

    let b = compare_city_vs_neighborhood(&focus, &w.table, &w.index, window).unwrap();
    assert!(b.empty_neighborhood);
    assert!(b.neighborhood_window.iter().all(|p| p.value == 0));
}

#[test]
fn fastest_focus_saturates_and_ring_is_sorted() {
    let totals = [
        ("Presidente Prudente", 40),
        ("Martinópolis", 1),
        ("Alfredo Marcondes", 7),
        ("Álvares Machado", 12),
        ("Regente Feijó", 3),
        ("Pirapozinho", 9),
        ("Caiabu", 5),
    ];
    let cases: Vec<_> = totals.iter().map(|(c, t)| (*c, "2020-05-05", *t)).collect();
    let w = world(&pp_region(), &cases, 6);
    let window = TimeWindow::new(d("2020-04-27"), d("2020-05-16")).unwrap();
    let g = build_glyph(
        &"Presidente Prudente".into(),
        &w.table,
        &w.index,
        window,
        NormalizationMode::UnitSquare,
    )
    .unwrap();
    assert_eq!(g.focus.score.saturation, 1.0);
    assert!(g.segments.iter().all(|s| s.score.saturation < 1.0));

    // sort oracle: neighbors by computed slope, descending
    let mut expected: Vec<(f64, String)> = totals[1..]
        .iter()
        .map(|(c, t)| (*t as f64 / 20.0, CityName::new(c).to_string()))
        .collect();
    expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let got: Vec<String> = g.segments.iter().map(|s| s.city.to_string()).collect();
    assert_eq!(got, expected.into_iter().map(|e| e.1).collect::<Vec<_>>());
}

#[test]
fn dominance_flag_matches_direct_comparison() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let window = TimeWindow::new(d("2020-04-27"), d("2020-05-16")).unwrap();
    for _ in 0..50 {
        let cases: Vec<(&str, String, i64)> = pp_region()
            .iter()
            .flat_map(|(c, ..)| {
                (0..3)
                    .map(|_| {
                        let day = d("2020-04-20") + Days::new(rng.random_range(0..27));
                        (*c, day.to_string(), rng.random_range(0..15))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let borrowed: Vec<(&str, &str, i64)> = cases
            .iter()
            .map(|(c, day, n)| (*c, day.as_str(), *n))
            .collect();
        let w = world(&pp_region(), &borrowed, 3);
        for (focus, ..) in pp_region() {
            let b =
                compare_city_vs_neighborhood(&focus.into(), &w.table, &w.index, window).unwrap();
            assert_eq!(
                b.city_dominates,
                b.city_window_total > b.neighborhood_window_total
            );
        }
    }
}

#[test]
fn isolation_table_entry_renders() {
    assert_eq!(format_isolation(0.47, 0.026), "47% ± 0.026");
    assert_eq!(format_isolation(0.47, 0.017), "47% ± 0.017");
}
