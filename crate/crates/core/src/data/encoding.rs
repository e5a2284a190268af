use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// How one feature column maps onto the encoded vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    /// Min-max normalized into `[0, 1]`; a constant column encodes to 0.
    Numeric { min: f64, max: f64 },
    /// One-hot over the sorted list of observed categories.
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureBlock {
    pub name: String,
    /// Index of the column in the schema's column list.
    pub column: usize,
    pub offset: usize,
    pub encoding: Encoding,
}

impl FeatureBlock {
    pub fn width(&self) -> usize {
        match &self.encoding {
            Encoding::Numeric { .. } => 1,
            Encoding::Categorical { categories } => categories.len(),
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.width()
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.encoding, Encoding::Numeric { .. })
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.encoding {
            Encoding::Categorical { categories } => Some(categories),
            Encoding::Numeric { .. } => None,
        }
    }

    fn encode_into(&self, raw: &str, out: &mut [f64]) -> Result<()> {
        match &self.encoding {
            Encoding::Numeric { min, max } => {
                let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                    row: 0,
                    column: self.name.clone(),
                    value: raw.to_string(),
                })?;
                out[0] = normalize(v, *min, *max);
            }
            Encoding::Categorical { categories } => {
                let pos = categories
                    .iter()
                    .position(|c| c == raw.trim())
                    .ok_or_else(|| {
                        Error::SchemaMismatch(format!(
                            "unknown category `{raw}` for column `{}`",
                            self.name
                        ))
                    })?;
                out.iter_mut().for_each(|v| *v = 0.0);
                out[pos] = 1.0;
            }
        }
        Ok(())
    }
}

pub(crate) fn normalize(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.0
    }
}

pub(crate) fn denormalize(v: f64, min: f64, max: f64) -> f64 {
    min + v * (max - min)
}

/// A decoded feature value.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Category(c) => f.write_str(c),
        }
    }
}

/// Ordered feature blocks making up one encoded row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingLayout {
    blocks: Vec<FeatureBlock>,
    width: usize,
    sensitive: Option<usize>,
}

impl EncodingLayout {
    /// Builds a layout from blocks whose offsets are recomputed in order.
    pub fn new(mut blocks: Vec<FeatureBlock>, sensitive_name: Option<&str>) -> Self {
        let mut offset = 0;
        for b in &mut blocks {
            b.offset = offset;
            offset += b.width();
        }
        let sensitive = sensitive_name.and_then(|n| blocks.iter().position(|b| b.name == n));
        Self {
            blocks,
            width: offset,
            sensitive,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&FeatureBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn sensitive_block(&self) -> Option<&FeatureBlock> {
        self.sensitive.map(|i| &self.blocks[i])
    }

    /// Blocks other than the sensitive one.
    pub fn non_sensitive_blocks(&self) -> impl Iterator<Item = &FeatureBlock> {
        let s = self.sensitive;
        self.blocks
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != s)
            .map(|(_, b)| b)
    }

    /// Per numeric column `(name, min, max)` captured at load.
    pub fn norm_params(&self) -> Vec<(String, f64, f64)> {
        self.blocks
            .iter()
            .filter_map(|b| match b.encoding {
                Encoding::Numeric { min, max } => Some((b.name.clone(), min, max)),
                Encoding::Categorical { .. } => None,
            })
            .collect()
    }

    /// Encodes one raw value per block, in block order.
    pub fn encode_values<S: AsRef<str>>(&self, values: &[S]) -> Result<Vec<f64>> {
        check_dim(self.blocks.len(), values.len())?;
        let mut out = vec![0.0; self.width];
        for (block, raw) in self.blocks.iter().zip(values) {
            block.encode_into(raw.as_ref(), &mut out[block.range()])?;
        }
        Ok(out)
    }

    /// Encodes a full raw record laid out in schema column order.
    pub(crate) fn encode_record(&self, record: &[String], out: &mut [f64]) -> Result<()> {
        for block in &self.blocks {
            block.encode_into(&record[block.column], &mut out[block.range()])?;
        }
        Ok(())
    }

    /// Inverse of [`encode_values`](Self::encode_values). Categorical blocks
    /// decode to their arg-max category.
    pub fn decode(&self, x: &[f64]) -> Result<Vec<RawValue>> {
        check_dim(self.width, x.len())?;
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                let cells = &x[b.range()];
                match &b.encoding {
                    Encoding::Numeric { min, max } => {
                        RawValue::Number(denormalize(cells[0], *min, *max))
                    }
                    Encoding::Categorical { categories } => {
                        let mut best = 0;
                        for (i, v) in cells.iter().enumerate() {
                            if *v > cells[best] {
                                best = i;
                            }
                        }
                        RawValue::Category(categories[best].clone())
                    }
                }
            })
            .collect())
    }

    /// Layout with the sensitive block removed, plus the encoded column range
    /// that block occupied.
    pub fn without_sensitive(&self) -> Result<(EncodingLayout, Range<usize>)> {
        let idx = self.sensitive.ok_or(Error::SensitiveAbsent)?;
        let range = self.blocks[idx].range();
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, b)| b.clone())
            .collect();
        Ok((EncodingLayout::new(blocks, None), range))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loan_layout() -> EncodingLayout {
        EncodingLayout::new(
            vec![
                FeatureBlock {
                    name: "income".into(),
                    column: 0,
                    offset: 0,
                    encoding: Encoding::Numeric { min: 0.1, max: 1.0 },
                },
                FeatureBlock {
                    name: "race".into(),
                    column: 1,
                    offset: 0,
                    encoding: Encoding::Categorical {
                        categories: vec!["Black".into(), "White".into()],
                    },
                },
            ],
            Some("race"),
        )
    }

    #[test]
    fn offsets_and_roundtrip() {
        let layout = loan_layout();
        assert_eq!(layout.width(), 3);
        assert_eq!(layout.sensitive_block().unwrap().range(), 1..3);
        let x = layout.encode_values(&["0.55", "White"]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert_eq!(&x[1..], &[0.0, 1.0]);
        let back = layout.decode(&x).unwrap();
        assert_eq!(back[1], RawValue::Category("White".into()));
        match back[0] {
            RawValue::Number(v) => assert!((v - 0.55).abs() < 1e-12),
            _ => panic!("expected number"),
        }
    }

    #[test]
    fn constant_column_encodes_to_zero() {
        assert_eq!(normalize(3.0, 3.0, 3.0), 0.0);
    }

    #[test]
    fn unknown_category_is_rejected() {
        assert!(loan_layout().encode_values(&["0.5", "Green"]).is_err());
    }

    #[test]
    fn drop_sensitive_twice_fails() {
        let (no_s, range) = loan_layout().without_sensitive().unwrap();
        assert_eq!(range, 1..3);
        assert_eq!(no_s.width(), 1);
        assert!(matches!(no_s.without_sensitive(), Err(Error::SensitiveAbsent)));
    }
}
