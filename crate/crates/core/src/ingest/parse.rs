use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use chrono::NaiveDate;

use super::{CityName, CityRecord, DailyCaseRow, IngestError, IsolationRow};

const ISO_DATE: &str = "%Y-%m-%d";

/// Column mapping for the upstream state health-data export.
///
/// Loaded from a small `key=value` file:
///
/// ```text
/// city=nome_munic
/// date=datahora
/// cases=casos_novos
/// date_format=%Y-%m-%d
/// delimiter=;
/// cumulative=false
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeadeMapping {
    pub city_column: String,
    pub date_column: String,
    pub cases_column: String,
    pub date_format: String,
    pub delimiter: u8,
    /// When set, the cases column holds running totals that are differenced
    /// per city into daily counts.
    pub cumulative: bool,
}

impl Default for SeadeMapping {
    fn default() -> Self {
        SeadeMapping {
            city_column: "nome_munic".into(),
            date_column: "datahora".into(),
            cases_column: "casos_novos".into(),
            date_format: ISO_DATE.into(),
            delimiter: b';',
            cumulative: false,
        }
    }
}

impl SeadeMapping {
    pub fn from_config(text: &str) -> Result<Self, IngestError> {
        let mut mapping = SeadeMapping::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IngestError::Config(format!("line {}: expected key=value, got '{line}'", i + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "city" => mapping.city_column = value.to_string(),
                "date" => mapping.date_column = value.to_string(),
                "cases" => mapping.cases_column = value.to_string(),
                "date_format" => mapping.date_format = value.to_string(),
                "delimiter" => {
                    let bytes = match value {
                        "\\t" | "tab" => b"\t".as_slice(),
                        other => other.as_bytes(),
                    };
                    if bytes.len() != 1 {
                        return Err(IngestError::Config(format!(
                            "line {}: delimiter must be a single byte",
                            i + 1
                        )));
                    }
                    mapping.delimiter = bytes[0];
                }
                "cumulative" => {
                    mapping.cumulative = value.parse().map_err(|_| {
                        IngestError::Config(format!(
                            "line {}: cumulative must be true or false",
                            i + 1
                        ))
                    })?
                }
                other => {
                    return Err(IngestError::Config(format!(
                        "line {}: unknown key '{other}'",
                        i + 1
                    )))
                }
            }
        }
        Ok(mapping)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseFormat {
    /// `city,date,new_cases`
    Canonical,
    Seade(SeadeMapping),
}

impl CaseFormat {
    /// Resolve a format tag (`canonical` or `seade`).
    pub fn from_tag(tag: &str, mapping: Option<SeadeMapping>) -> Result<Self, IngestError> {
        match tag {
            "canonical" => Ok(CaseFormat::Canonical),
            "seade" => Ok(CaseFormat::Seade(mapping.unwrap_or_default())),
            other => Err(IngestError::Config(format!(
                "unknown case format '{other}'"
            ))),
        }
    }
}

/// An opened table plus the positions of any optional columns found.
type Opened<R> = Option<(Table<R>, Vec<Option<usize>>)>;

struct Table<R> {
    source: &'static str,
    reader: csv::Reader<R>,
    columns: Vec<usize>,
}

impl<R: Read> Table<R> {
    /// Open a CSV stream and locate the required (and optional) columns.
    /// An empty stream yields `None`.
    fn open(
        source: &'static str,
        input: R,
        delimiter: u8,
        required: &[&str],
        optional: &[&str],
    ) -> Result<Opened<R>, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .has_headers(true)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| csv_error(source, &e, "header"))?
            .clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
            return Ok(None);
        }
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let idx = find(name).ok_or_else(|| {
                IngestError::parse(
                    source,
                    1,
                    name,
                    format!("missing column (header: {})", required.join(",")),
                )
            })?;
            columns.push(idx);
        }
        let optional = optional.iter().map(|n| find(n)).collect();
        Ok(Some((
            Table {
                source,
                reader,
                columns,
            },
            optional,
        )))
    }

    fn for_each(
        &mut self,
        mut f: impl FnMut(u64, &csv::StringRecord, &[usize]) -> Result<(), IngestError>,
    ) -> Result<(), IngestError> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => return Err(csv_error(self.source, &e, "record")),
            }
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            let line = record.position().map_or(0, |p| p.line());
            f(line, &record, &self.columns)?;
        }
    }
}

fn csv_error(source: &str, err: &csv::Error, field: &str) -> IngestError {
    let line = err.position().map_or(0, |p| p.line());
    IngestError::parse(source, line, field, err.to_string())
}

fn field<'r>(
    source: &str,
    line: u64,
    record: &'r csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'r str, IngestError> {
    let value = record
        .get(idx)
        .map(str::trim)
        .ok_or_else(|| IngestError::parse(source, line, name, "missing field"))?;
    if value.is_empty() {
        return Err(IngestError::parse(source, line, name, "empty field"));
    }
    Ok(value)
}

fn city_field(
    source: &str,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<CityName, IngestError> {
    Ok(CityName::new(field(source, line, record, idx, name)?))
}

fn date_field(
    source: &str,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    format: &str,
) -> Result<NaiveDate, IngestError> {
    let raw = field(source, line, record, idx, name)?;
    NaiveDate::parse_from_str(raw, format)
        .map_err(|e| IngestError::parse(source, line, name, format!("bad date '{raw}': {e}")))
}

fn int_field(
    source: &str,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<i64, IngestError> {
    let raw = field(source, line, record, idx, name)?;
    raw.parse()
        .map_err(|_| IngestError::parse(source, line, name, format!("not an integer: '{raw}'")))
}

fn float_field(
    source: &str,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<f64, IngestError> {
    let raw = field(source, line, record, idx, name)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::parse(
            source,
            line,
            name,
            format!("not a number: '{raw}'"),
        )),
    }
}

/// Parse daily case rows.
///
/// Duplicate `(city, date)` rows are summed and the output is sorted by
/// `(city, date)`.
pub fn parse_cases<R: Read>(
    input: R,
    format: &CaseFormat,
) -> Result<Vec<DailyCaseRow>, IngestError> {
    const SRC: &str = "cases";
    let (city_col, date_col, cases_col, date_format, delimiter) = match format {
        CaseFormat::Canonical => ("city", "date", "new_cases", ISO_DATE, b','),
        CaseFormat::Seade(m) => (
            m.city_column.as_str(),
            m.date_column.as_str(),
            m.cases_column.as_str(),
            m.date_format.as_str(),
            m.delimiter,
        ),
    };
    let Some((mut table, _)) =
        Table::open(SRC, input, delimiter, &[city_col, date_col, cases_col], &[])?
    else {
        return Ok(Vec::new());
    };

    let cumulative = matches!(format, CaseFormat::Seade(m) if m.cumulative);
    let mut totals: BTreeMap<(CityName, NaiveDate), i64> = BTreeMap::new();
    table.for_each(|line, rec, cols| {
        let city = city_field(SRC, line, rec, cols[0], city_col)?;
        let date = date_field(SRC, line, rec, cols[1], date_col, date_format)?;
        let n = int_field(SRC, line, rec, cols[2], cases_col)?;
        match totals.entry((city, date)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(n);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if cumulative {
                    return Err(IngestError::parse(
                        SRC,
                        line,
                        cases_col,
                        "duplicate (city, date) in a cumulative feed",
                    ));
                }
                *o.get_mut() += n;
            }
        }
        Ok(())
    })?;

    let mut rows: Vec<DailyCaseRow> = totals
        .into_iter()
        .map(|((city, date), new_cases)| DailyCaseRow {
            city,
            date,
            new_cases,
        })
        .collect();
    if cumulative {
        difference_running_totals(&mut rows);
    }
    Ok(rows)
}

/// Rows must be sorted by `(city, date)`. The first value per city is taken
/// as that day's count.
fn difference_running_totals(rows: &mut [DailyCaseRow]) {
    let mut prev: Option<(CityName, i64)> = None;
    for row in rows.iter_mut() {
        let total = row.new_cases;
        if let Some((city, last)) = &prev {
            if *city == row.city {
                row.new_cases = total - last;
            }
        }
        prev = Some((row.city.clone(), total));
    }
}

/// Parse `city,date,index` rows. Indices above 1 are read as percentages.
pub fn parse_isolation<R: Read>(input: R) -> Result<Vec<IsolationRow>, IngestError> {
    const SRC: &str = "isolation";
    let Some((mut table, _)) = Table::open(SRC, input, b',', &["city", "date", "index"], &[])?
    else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::new();
    table.for_each(|line, rec, cols| {
        let city = city_field(SRC, line, rec, cols[0], "city")?;
        let date = date_field(SRC, line, rec, cols[1], "date", ISO_DATE)?;
        let raw = float_field(SRC, line, rec, cols[2], "index")?;
        if !(0.0..=100.0).contains(&raw) {
            return Err(IngestError::parse(
                SRC,
                line,
                "index",
                format!("{raw} outside [0, 100]"),
            ));
        }
        let index = if raw > 1.0 { raw / 100.0 } else { raw };
        rows.push(IsolationRow { city, date, index });
        Ok(())
    })?;
    Ok(rows)
}

/// Parse `city,lat,lon[,population]` rows.
pub fn parse_coordinates<R: Read>(input: R) -> Result<Vec<CityRecord>, IngestError> {
    const SRC: &str = "coords";
    let Some((mut table, optional)) =
        Table::open(SRC, input, b',', &["city", "lat", "lon"], &["population"])?
    else {
        return Ok(Vec::new());
    };
    let population_col = optional[0];
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    table.for_each(|line, rec, cols| {
        let name = city_field(SRC, line, rec, cols[0], "city")?;
        let lat = float_field(SRC, line, rec, cols[1], "lat")?;
        let lon = float_field(SRC, line, rec, cols[2], "lon")?;
        let population = match population_col.and_then(|i| rec.get(i)).map(str::trim) {
            None | Some("") => None,
            Some(raw) => Some(raw.parse::<u64>().map_err(|_| {
                IngestError::parse(
                    SRC,
                    line,
                    "population",
                    format!("not a positive integer: '{raw}'"),
                )
            })?),
        };
        if !seen.insert(name.clone()) {
            return Err(IngestError::parse(
                SRC,
                line,
                "city",
                format!("duplicate city '{name}'"),
            ));
        }
        let record = CityRecord::new(name, lat, lon, population).map_err(|msg| {
            let field = if msg.starts_with("latitude") {
                "lat"
            } else if msg.starts_with("longitude") {
                "lon"
            } else {
                "population"
            };
            IngestError::parse(SRC, line, field, msg)
        })?;
        rows.push(record);
        Ok(())
    })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cases(body: &str) -> Result<Vec<DailyCaseRow>, IngestError> {
        parse_cases(
            std::io::Cursor::new(format!("city,date,new_cases\n{body}")),
            &CaseFormat::Canonical,
        )
    }

    fn expect_parse_error(err: IngestError, want_line: u64, want_field: &str) {
        match err {
            IngestError::Parse { line, field, .. } => {
                assert_eq!(line, want_line);
                assert_eq!(field, want_field);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_rows_map_directly() {
        let rows = cases("A,2020-03-01,2\nA,2020-03-02,3").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.city == CityName::new("A")));
        assert_eq!(rows.iter().map(|r| r.new_cases).collect::<Vec<_>>(), [2, 3]);
    }

    #[test]
    fn duplicate_rows_are_summed() {
        let rows = cases("A,2020-03-01,2\nA,2020-03-01,1").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].new_cases, 3);
    }

    #[test]
    fn empty_count_reports_line_and_field() {
        expect_parse_error(cases("A,2020-03-01,").unwrap_err(), 2, "new_cases");
    }

    #[test]
    fn non_integer_count_is_rejected() {
        expect_parse_error(cases("A,2020-03-01,2.5").unwrap_err(), 2, "new_cases");
        expect_parse_error(
            cases("A,2020-03-01,1\nA,2020-03-02,x").unwrap_err(),
            3,
            "new_cases",
        );
    }

    #[test]
    fn malformed_date_is_rejected() {
        expect_parse_error(cases("A,03/01/2020,1").unwrap_err(), 2, "date");
    }

    #[test]
    fn missing_header_column_fails_on_line_one() {
        let err = parse_cases(
            std::io::Cursor::new("A,2020-03-01,2\n"),
            &CaseFormat::Canonical,
        )
        .unwrap_err();
        expect_parse_error(err, 1, "city");
    }

    #[test]
    fn rows_come_out_sorted() {
        let rows = cases("B,2020-03-02,1\nA,2020-03-03,1\nA,2020-03-01,1").unwrap();
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.city.as_str(), r.date.to_string()))
            .collect();
        assert_eq!(
            keys,
            [
                ("a", "2020-03-01".to_string()),
                ("a", "2020-03-03".to_string()),
                ("b", "2020-03-02".to_string())
            ]
        );
    }

    #[test]
    fn unknown_format_tag_is_a_config_error() {
        assert!(matches!(
            CaseFormat::from_tag("xlsx", None),
            Err(IngestError::Config(_))
        ));
        assert_eq!(
            CaseFormat::from_tag("canonical", None).unwrap(),
            CaseFormat::Canonical
        );
    }

    #[test]
    fn seade_adapter_maps_columns() {
        let mapping = SeadeMapping::from_config(
            "# upstream export\ncity=nome_munic\ndate=datahora\ncases=casos_novos\ndelimiter=;\n",
        )
        .unwrap();
        let input = "nome_munic;codigo_ibge;datahora;casos_novos\n\
                     Santos;3548500;2020-03-20;4\n\
                     Santos;3548500;2020-03-21;0\n\
                     Guarujá;3518701;2020-03-21;2\n";
        let rows = parse_cases(std::io::Cursor::new(input), &CaseFormat::Seade(mapping)).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].city.as_str(), "guarujá");
        assert_eq!(rows[1].new_cases, 4);
    }

    #[test]
    fn seade_cumulative_feed_is_differenced() {
        let mapping = SeadeMapping::from_config("cases=casos\ncumulative=true").unwrap();
        let input = "nome_munic;datahora;casos\n\
                     A;2020-03-01;2\nA;2020-03-02;5\nA;2020-03-04;5\nB;2020-03-02;1\n";
        let rows = parse_cases(std::io::Cursor::new(input), &CaseFormat::Seade(mapping)).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.new_cases).collect::<Vec<_>>(),
            [2, 3, 0, 1]
        );
    }

    #[test]
    fn seade_config_rejects_unknown_keys() {
        assert!(matches!(
            SeadeMapping::from_config("colour=blue"),
            Err(IngestError::Config(_))
        ));
        assert!(
            SeadeMapping::from_config("delimiter=tab")
                .unwrap()
                .delimiter
                == b'\t'
        );
    }

    fn isolation(body: &str) -> Result<Vec<IsolationRow>, IngestError> {
        parse_isolation(std::io::Cursor::new(format!("city,date,index\n{body}")))
    }

    #[test]
    fn isolation_percent_and_fraction() {
        assert_eq!(isolation("Santos,2020-03-20,45").unwrap()[0].index, 0.45);
        assert_eq!(isolation("Santos,2020-03-20,0.45").unwrap()[0].index, 0.45);
        assert_eq!(isolation("Santos,2020-03-20,1").unwrap()[0].index, 1.0);
        assert_eq!(isolation("Santos,2020-03-20,100").unwrap()[0].index, 1.0);
    }

    #[test]
    fn isolation_out_of_range_or_bad_date() {
        expect_parse_error(isolation("Santos,2020-03-20,145").unwrap_err(), 2, "index");
        expect_parse_error(isolation("Santos,2020-03-20,-1").unwrap_err(), 2, "index");
        expect_parse_error(isolation("Santos,2020-13-20,45").unwrap_err(), 2, "date");
    }

    fn coords(body: &str) -> Result<Vec<CityRecord>, IngestError> {
        parse_coordinates(std::io::Cursor::new(format!(
            "city,lat,lon,population\n{body}"
        )))
    }

    #[test]
    fn coordinates_map_directly() {
        let rows = coords("X,-22.12,-51.38,").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].name.as_str(), "x");
        assert_eq!(rows[0].latitude, -22.12);
        assert_eq!(rows[0].longitude, -51.38);
        assert_eq!(rows[0].population, None);

        let no_pop_column =
            parse_coordinates(std::io::Cursor::new("city,lat,lon\nX,-22.12,-51.38\n")).unwrap();
        assert_eq!(no_pop_column[0].population, None);
        assert_eq!(coords("Y,1,2,12000").unwrap()[0].population, Some(12000));
    }

    #[test]
    fn coordinates_out_of_range_and_duplicates() {
        expect_parse_error(coords("X,95,0").unwrap_err(), 2, "lat");
        expect_parse_error(coords("X,0,200").unwrap_err(), 2, "lon");
        expect_parse_error(coords("X,1,1\nx ,2,2").unwrap_err(), 3, "city");
    }

    #[test]
    fn empty_inputs_yield_no_rows() {
        assert!(parse_coordinates(std::io::Cursor::new(""))
            .unwrap()
            .is_empty());
        assert!(parse_coordinates(std::io::Cursor::new("city,lat,lon\n"))
            .unwrap()
            .is_empty());
    }
}
