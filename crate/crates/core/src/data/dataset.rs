use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{Encoding, EncodingLayout, FeatureBlock};
use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Optional CSV column carrying stable row identifiers. Written by
/// [`Dataset::write_csv`] so that a reloaded subset keeps its original ids.
pub const ROW_ID_COLUMN: &str = "row_id";

/// Stable identifier of a row in the originally loaded file (1-based line
/// order unless the file carries a `row_id` column).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RowId(pub u64);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One labelled row borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub y: u8,
}

/// Deterministic train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub permutation_seed: u64,
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn new(permutation_seed: u64) -> Self {
        Self {
            permutation_seed,
            train_fraction: 0.8,
        }
    }
}

/// An encoded tabular dataset.
///
/// Immutable once built. Subsets share the schema and the encoding layout of
/// their parent, so the normalization captured at load is never recomputed.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    layout: Arc<EncodingLayout>,
    sensitive_values: Arc<[String; 2]>,
    row_ids: Vec<RowId>,
    raw: Vec<Box<[String]>>,
    encoded: Vec<f64>,
    labels: Vec<u8>,
    groups: Vec<u8>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, schema)
    }

    pub fn from_reader<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Self> {
        schema.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

        let id_pos = header.iter().position(|h| h == ROW_ID_COLUMN);
        let mut positions = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let pos = header.iter().position(|h| *h == col.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("column `{}` missing from header", col.name))
            })?;
            positions.push(pos);
        }
        for (i, h) in header.iter().enumerate() {
            if Some(i) != id_pos && !positions.contains(&i) {
                return Err(Error::SchemaMismatch(format!(
                    "column `{h}` is not declared in the schema"
                )));
            }
        }

        let mut records = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id = match id_pos {
                Some(p) => {
                    let cell = &rec[p];
                    let v = cell.parse::<u64>().map_err(|_| Error::Parse {
                        row: line + 1,
                        column: ROW_ID_COLUMN.into(),
                        value: cell.to_string(),
                    })?;
                    RowId(v)
                }
                None => RowId(line as u64 + 1),
            };
            let values = positions.iter().map(|&p| rec[p].to_string()).collect();
            records.push((id, values));
        }
        Self::from_records(schema, records)
    }

    /// Builds a dataset from raw records in schema column order.
    pub fn from_records(schema: &FeatureSchema, records: Vec<(RowId, Vec<String>)>) -> Result<Self> {
        schema.validate()?;
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let ncols = schema.columns.len();
        let mut ids = HashSet::with_capacity(records.len());
        for (row, (id, values)) in records.iter().enumerate() {
            if values.len() != ncols {
                return Err(Error::SchemaMismatch(format!(
                    "row {} has {} cells, expected {ncols}",
                    row + 1,
                    values.len()
                )));
            }
            if !ids.insert(*id) {
                return Err(Error::SchemaMismatch(format!("duplicate row id {id}")));
            }
        }

        let label_idx = schema.label_index();
        let mut labels = Vec::with_capacity(records.len());
        let mut negatives = BTreeSet::new();
        for (_, values) in &records {
            let v = values[label_idx].as_str();
            if v == schema.positive_label {
                labels.push(1u8);
            } else {
                match &schema.negative_label {
                    Some(neg) if neg != v => {
                        return Err(Error::Label(format!(
                            "label value `{v}` is neither `{}` nor `{neg}`",
                            schema.positive_label
                        )))
                    }
                    _ => {}
                }
                negatives.insert(v.to_string());
                labels.push(0u8);
            }
        }
        if negatives.len() > 1 {
            return Err(Error::Label(format!(
                "label column has more than two values: `{}` plus {:?}",
                schema.positive_label, negatives
            )));
        }

        let mut blocks = Vec::new();
        for (col_idx, col) in schema.feature_columns() {
            let encoding = match col.kind {
                FeatureKind::Numeric => {
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    for (row, (_, values)) in records.iter().enumerate() {
                        let cell = &values[col_idx];
                        let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                            row: row + 1,
                            column: col.name.clone(),
                            value: cell.clone(),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                row: row + 1,
                                column: col.name.clone(),
                                value: cell.clone(),
                            });
                        }
                        min = min.min(v);
                        max = max.max(v);
                    }
                    Encoding::Numeric { min, max }
                }
                FeatureKind::Categorical => {
                    let cats: BTreeSet<&str> =
                        records.iter().map(|(_, v)| v[col_idx].as_str()).collect();
                    Encoding::Categorical {
                        categories: cats.into_iter().map(str::to_string).collect(),
                    }
                }
            };
            blocks.push(FeatureBlock {
                name: col.name.clone(),
                column: col_idx,
                offset: 0,
                encoding,
            });
        }
        let layout = EncodingLayout::new(blocks, Some(&schema.sensitive));
        let sens_block = layout
            .sensitive_block()
            .expect("validated schema declares the sensitive column");
        let cats = sens_block.categories().expect("sensitive column is categorical");
        if cats.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "sensitive column `{}` must have exactly 2 distinct values, found {}",
                schema.sensitive,
                cats.len()
            )));
        }
        let sensitive_values = Arc::new([cats[0].clone(), cats[1].clone()]);
        let sens_col = sens_block.column;

        let width = layout.width();
        let mut encoded = vec![0.0; records.len() * width];
        let mut row_ids = Vec::with_capacity(records.len());
        let mut raw = Vec::with_capacity(records.len());
        let mut groups = Vec::with_capacity(records.len());
        for (row, (id, values)) in records.into_iter().enumerate() {
            layout.encode_record(&values, &mut encoded[row * width..(row + 1) * width])?;
            groups.push(if values[sens_col] == sensitive_values[0] { 0 } else { 1 });
            row_ids.push(id);
            raw.push(values.into_boxed_slice());
        }

        Ok(Self {
            schema: Arc::new(schema.clone()),
            layout: Arc::new(layout),
            sensitive_values,
            row_ids,
            raw,
            encoded,
            labels,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Encoded row width.
    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn layout(&self) -> &EncodingLayout {
        &self.layout
    }

    pub fn shared_layout(&self) -> Arc<EncodingLayout> {
        Arc::clone(&self.layout)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.encoded[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn examples(&self) -> impl ExactSizeIterator<Item = Example<'_>> + '_ {
        (0..self.len()).map(move |i| Example {
            x: self.row(i),
            y: self.labels[i],
        })
    }

    pub fn encoded(&self) -> &[f64] {
        &self.encoded
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn raw_row(&self, i: usize) -> &[String] {
        &self.raw[i]
    }

    /// Sensitive group index per row: 0 for `sensitive_values()[0]`, 1 otherwise.
    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    /// The two sensitive values in sorted order.
    pub fn sensitive_values(&self) -> &[String; 2] {
        &self.sensitive_values
    }

    pub fn norm_params(&self) -> Vec<(String, f64, f64)> {
        self.layout.norm_params()
    }

    pub fn position(&self, id: RowId) -> Option<usize> {
        self.row_ids.iter().position(|r| *r == id)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let w = self.width();
        let mut encoded = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            encoded.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            layout: Arc::clone(&self.layout),
            sensitive_values: Arc::clone(&self.sensitive_values),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            raw: indices.iter().map(|&i| self.raw[i].clone()).collect(),
            encoded,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Drops every row whose id is in `ids`, keeping the order of the rest.
    pub fn without_ids(&self, ids: &HashSet<RowId>) -> Dataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !ids.contains(&self.row_ids[i]))
            .collect();
        self.subset(&keep)
    }

    /// Permutes rows with `spec.permutation_seed`, then takes the first
    /// `floor(train_fraction * n)` rows as the training set.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                spec.train_fraction
            )));
        }
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.permutation_seed);
        order.shuffle(&mut rng);
        let cut = (spec.train_fraction * self.len() as f64).floor() as usize;
        Ok((self.subset(&order[..cut]), self.subset(&order[cut..])))
    }

    /// The same rows with the sensitive attribute's one-hot block removed from
    /// the encoding. Raw records keep the sensitive value, so group-based
    /// metrics remain available.
    pub fn drop_sensitive(&self) -> Result<Dataset> {
        let (layout, range) = self.layout.without_sensitive()?;
        let w = self.width();
        let mut encoded = Vec::with_capacity(self.len() * layout.width());
        for i in 0..self.len() {
            let row = &self.encoded[i * w..(i + 1) * w];
            encoded.extend_from_slice(&row[..range.start]);
            encoded.extend_from_slice(&row[range.end..]);
        }
        Ok(Dataset {
            layout: Arc::new(layout),
            encoded,
            ..self.clone()
        })
    }

    /// Writes the original raw values, prefixed with the `row_id` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![ROW_ID_COLUMN.to_string()];
        header.extend(self.schema.columns.iter().map(|c| c.name.clone()));
        wtr.write_record(&header)?;
        for (id, raw) in self.row_ids.iter().zip(&self.raw) {
            let mut rec = vec![id.to_string()];
            rec.extend(raw.iter().cloned());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnSpec;
    use crate::data::RawValue;
    use proptest::prelude::*;

    const TABLE1: &str = "income,wealth,race,decision
1.0,0.1,White,1
0.9,0.7,Black,0
0.8,0.3,White,1
0.1,0.7,Black,0
0.1,0.5,White,0
0.5,0.9,Black,0
1.0,0.8,Black,1
";

    fn loan_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                ColumnSpec::numeric("income"),
                ColumnSpec::numeric("wealth"),
                ColumnSpec::categorical("race"),
                ColumnSpec::categorical("decision"),
            ],
            "race",
            "decision",
            "1",
        )
        .unwrap()
    }

    fn table1() -> Dataset {
        Dataset::from_reader(TABLE1.as_bytes(), &loan_schema()).unwrap()
    }

    #[test]
    fn loads_loan_table() {
        let d = table1();
        assert_eq!(d.len(), 7);
        assert_eq!(d.width(), 4);
        assert_eq!(d.layout().block("race").unwrap().width(), 2);
        assert_eq!(d.labels(), &[1, 0, 1, 0, 0, 0, 1]);
        assert_eq!(d.row_ids()[1], RowId(2));
        assert_eq!(d.sensitive_values(), &["Black".to_string(), "White".to_string()]);
        assert_eq!(d.groups(), &[1, 0, 1, 0, 1, 0, 0]);
        for row in d.rows() {
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(row[2] + row[3], 1.0);
        }
    }

    #[test]
    fn constant_numeric_column_encodes_to_zero() {
        let csv = "income,wealth,race,decision\n2,0.1,White,1\n2,0.7,Black,0\n";
        let d = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap();
        assert_eq!(d.row(0)[0], 0.0);
        assert_eq!(d.row(1)[0], 0.0);
    }

    #[test]
    fn missing_sensitive_column_is_schema_mismatch() {
        let csv = "income,wealth,decision\n1,0.1,1\n";
        let err = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)), "{err}");
    }

    #[test]
    fn extra_column_is_schema_mismatch() {
        let csv = "income,wealth,race,decision,zip\n1,0.1,White,1,9\n0,0.1,Black,1,9\n";
        let err = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }

    #[test]
    fn non_numeric_cell_is_parse_error() {
        let csv = "income,wealth,race,decision\nhigh,0.1,White,1\n0.2,0.1,Black,0\n";
        let err = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "income");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn label_outside_declared_set() {
        let mut schema = loan_schema();
        schema.negative_label = Some("0".into());
        let csv = "income,wealth,race,decision\n1,0.1,White,1\n0.2,0.1,Black,maybe\n";
        assert!(matches!(
            Dataset::from_reader(csv.as_bytes(), &schema),
            Err(Error::Label(_))
        ));
        let three = "income,wealth,race,decision\n1,0.1,White,1\n0.2,0.1,Black,0\n0.3,0.1,Black,2\n";
        assert!(matches!(
            Dataset::from_reader(three.as_bytes(), &loan_schema()),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn sensitive_with_one_value_is_rejected() {
        let csv = "income,wealth,race,decision\n1,0.1,White,1\n0.2,0.1,White,0\n";
        assert!(matches!(
            Dataset::from_reader(csv.as_bytes(), &loan_schema()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut csv = String::from("income,wealth,race,decision\n");
        for i in 0..10 {
            csv.push_str(&format!("{i},0.5,{},{}\n", if i % 2 == 0 { "A" } else { "B" }, i % 2));
        }
        let d = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap();
        let (tr, te) = d.split(&SplitSpec::new(3)).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let (tr2, te2) = d.split(&SplitSpec::new(3)).unwrap();
        assert_eq!(tr.row_ids(), tr2.row_ids());
        assert_eq!(te.row_ids(), te2.row_ids());
    }

    #[test]
    fn distinct_seeds_give_distinct_orders() {
        let mut csv = String::from("income,wealth,race,decision\n");
        for i in 0..1000 {
            csv.push_str(&format!("{i},0.5,{},{}\n", if i % 2 == 0 { "A" } else { "B" }, i % 2));
        }
        let d = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap();
        let (a, _) = d.split(&SplitSpec::new(1)).unwrap();
        let (b, _) = d.split(&SplitSpec::new(2)).unwrap();
        assert_ne!(a.row_ids(), b.row_ids());
    }

    #[test]
    fn bad_train_fraction() {
        let spec = SplitSpec {
            permutation_seed: 0,
            train_fraction: 1.0,
        };
        assert!(matches!(table1().split(&spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn drop_sensitive_shrinks_width() {
        let d = table1();
        let sr = d.drop_sensitive().unwrap();
        assert_eq!(sr.width(), d.width() - 2);
        let names: Vec<_> = sr.layout().blocks().iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["income", "wealth"]);
        assert_eq!(sr.row(1), &d.row(1)[..2]);
        assert!(matches!(sr.drop_sensitive(), Err(Error::SensitiveAbsent)));
    }

    #[test]
    fn csv_roundtrip_keeps_row_ids() {
        let d = table1();
        let sub = d.subset(&[6, 0, 3]);
        let mut buf = Vec::new();
        sub.write_csv(&mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), &loan_schema()).unwrap();
        assert_eq!(back.row_ids(), &[RowId(7), RowId(1), RowId(4)]);
        assert_eq!(back.labels(), sub.labels());
    }

    #[test]
    fn subset_encoding_matches_parent_slices() {
        let d = table1();
        let sub = d.subset(&[4, 0, 2]);
        for i in 0..sub.len() {
            let mut fresh = vec![0.0; sub.width()];
            sub.layout().encode_record(sub.raw_row(i), &mut fresh).unwrap();
            assert_eq!(fresh.as_slice(), sub.row(i));
        }
        assert_eq!(sub.norm_params(), d.norm_params());
    }

    #[test]
    fn decode_recovers_raw_values() {
        let d = table1();
        for i in 0..d.len() {
            let decoded = d.layout().decode(d.row(i)).unwrap();
            for (value, block) in decoded.iter().zip(d.layout().blocks()) {
                let raw = &d.raw_row(i)[block.column];
                match value {
                    RawValue::Number(v) => {
                        assert!((v - raw.parse::<f64>().unwrap()).abs() < 1e-12)
                    }
                    RawValue::Category(c) => assert_eq!(c, raw),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn split_is_partition(seed in any::<u64>(), n in 2usize..60) {
            let mut csv = String::from("income,wealth,race,decision\n");
            for i in 0..n {
                csv.push_str(&format!("{i},0.5,{},{}\n", if i % 2 == 0 { "A" } else { "B" }, i % 2));
            }
            let d = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap();
            let (tr, te) = d.split(&SplitSpec::new(seed)).unwrap();
            let mut all: Vec<RowId> = tr.row_ids().iter().chain(te.row_ids()).copied().collect();
            all.sort();
            prop_assert_eq!(all, d.row_ids().to_vec());
        }

        #[test]
        fn numeric_roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 2..20)) {
            let mut csv = String::from("income,wealth,race,decision\n");
            for (i, v) in values.iter().enumerate() {
                csv.push_str(&format!("{v},1,{},1\n", if i % 2 == 0 { "A" } else { "B" }));
            }
            let d = Dataset::from_reader(csv.as_bytes(), &loan_schema()).unwrap();
            let span = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            for (i, v) in values.iter().enumerate() {
                let x = d.row(i);
                prop_assert!((0.0..=1.0).contains(&x[0]));
                if let RawValue::Number(back) = &d.layout().decode(x).unwrap()[0] {
                    prop_assert!((back - v).abs() <= 1e-12 * span.max(1.0));
                }
            }
        }
    }
}
