use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::features::{feature_names, ImageFeatureBlock, StatRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub image_id: String,
    pub stat: StatRow,
}

/// Row-labelled feature matrix (`F_3` and its column subsets).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<RowLabel>,
    pub data: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Stacks image blocks, eight rows per image, in the given order.
    pub fn from_blocks(blocks: &[ImageFeatureBlock]) -> Self {
        let width = blocks.first().map_or(0, |b| b.rows[0].len());
        let mut rows = Vec::with_capacity(blocks.len() * 8);
        let mut values = Vec::with_capacity(blocks.len() * 8 * width);
        for b in blocks {
            for (stat, r) in StatRow::ALL.iter().zip(&b.rows) {
                rows.push(RowLabel {
                    image_id: b.image_id.clone(),
                    stat: *stat,
                });
                values.extend_from_slice(r);
            }
        }
        let columns = if width == feature_names().len() {
            feature_names()
        } else {
            (0..width).map(|i| format!("f{i}")).collect()
        };
        let data = DMatrix::from_row_slice(rows.len(), width, &values);
        Self {
            columns,
            rows,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows.clone(),
            data: self.data.select_columns(idx),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,stat");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, label) in self.rows.iter().enumerate() {
            out.push_str(&label.image_id);
            out.push(',');
            out.push_str(label.stat.name());
            for j in 0..self.ncols() {
                let _ = write!(out, ",{}", self.data[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty feature CSV".into()))?;
        let head: Vec<&str> = header.split(',').collect();
        if head.len() < 3 || head[0] != "image_id" || head[1] != "stat" {
            return Err(Error::Parse(
                "feature CSV header must start with image_id,stat".into(),
            ));
        }
        let columns: Vec<String> = head[2..].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != head.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    n + 2,
                    fields.len(),
                    head.len()
                )));
            }
            let stat = StatRow::parse(fields[1])
                .ok_or_else(|| Error::Parse(format!("unknown statistic row '{}'", fields[1])))?;
            rows.push(RowLabel {
                image_id: fields[0].to_string(),
                stat,
            });
            for f in &fields[2..] {
                values.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", n + 2)))?,
                );
            }
        }
        let data = DMatrix::from_row_slice(rows.len(), columns.len(), &values);
        Ok(Self {
            columns,
            rows,
            data,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}
