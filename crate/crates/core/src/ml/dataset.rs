use std::io::{Read, Write};

use super::MlError;
use crate::features::FeatureVector;
use crate::label::Label;

/// Feature matrix with dense class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Optional row identifiers (user ids), parallel to `rows` when present.
    pub ids: Vec<String>,
}

impl Dataset {
    /// Validates shapes and label range. Non-finite values are imputed as 0.
    pub fn new(
        features: Vec<String>,
        mut rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, MlError> {
        if rows.len() != labels.len() {
            return Err(MlError::LengthMismatch {
                what: "rows vs labels",
                left: rows.len(),
                right: labels.len(),
            });
        }
        for (i, r) in rows.iter_mut().enumerate() {
            if r.len() != features.len() {
                return Err(MlError::RowWidth {
                    row: i,
                    got: r.len(),
                    expected: features.len(),
                });
            }
            r.iter_mut().filter(|x| !x.is_finite()).for_each(|x| *x = 0.0);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(MlError::LabelOutOfRange(bad));
        }
        Ok(Dataset {
            features,
            rows,
            labels,
            class_names,
            ids: Vec::new(),
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self, MlError> {
        if ids.len() != self.rows.len() {
            return Err(MlError::LengthMismatch {
                what: "ids vs rows",
                left: ids.len(),
                right: self.rows.len(),
            });
        }
        self.ids = ids;
        Ok(self)
    }

    /// Builds a four-class dataset from assembled feature vectors; columns follow the
    /// first vector's active columns.
    pub fn from_feature_vectors(vectors: &[FeatureVector], labels: &[Label]) -> Result<Self, MlError> {
        if vectors.len() != labels.len() {
            return Err(MlError::LengthMismatch {
                what: "feature vectors vs labels",
                left: vectors.len(),
                right: labels.len(),
            });
        }
        let features: Vec<String> = vectors
            .first()
            .map(|v| v.columns().into_iter().map(|(n, _)| n).collect())
            .unwrap_or_default();
        let rows = vectors.iter().map(|v| v.columns().into_iter().map(|(_, x)| x).collect()).collect();
        let class_names = Label::ALL.iter().map(|l| l.as_str().to_string()).collect();
        let ds = Dataset::new(features, rows, labels.iter().map(|l| l.index()).collect(), class_names)?;
        ds.with_ids(vectors.iter().map(|v| v.user_id.clone()).collect())
    }

    /// Dataset whose labels are given by name, with classes in `class_order`.
    pub fn from_named(
        features: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: &[String],
        class_order: &[&str],
    ) -> Result<Self, MlError> {
        let idx = labels
            .iter()
            .map(|l| {
                class_order
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| MlError::UnknownClass(l.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Dataset::new(features, rows, idx, class_order.iter().map(|s| s.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Number of classes with at least one row.
    pub fn present_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows at `indices` (duplicates allowed), same class list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            ids: if self.ids.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.ids[i].clone()).collect()
            },
        }
    }

    pub(crate) fn require_two_classes(&self) -> Result<(), MlError> {
        if self.is_empty() {
            return Err(MlError::Empty);
        }
        if self.present_classes() < 2 {
            return Err(MlError::SingleClass);
        }
        Ok(())
    }

    /// CSV with a header of feature names followed by `label` (and a leading `id`
    /// column when ids are present).
    pub fn write_csv(&self, w: impl Write) -> Result<(), MlError> {
        let mut out = csv::Writer::from_writer(w);
        let with_ids = !self.ids.is_empty();
        let mut header: Vec<&str> = Vec::new();
        if with_ids {
            header.push("id");
        }
        header.extend(self.features.iter().map(String::as_str));
        header.push("label");
        out.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = Vec::with_capacity(row.len() + 2);
            if with_ids {
                rec.push(self.ids[i].clone());
            }
            rec.extend(row.iter().map(|x| x.to_string()));
            rec.push(self.class_names[self.labels[i]].clone());
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the CSV layout of [`Dataset::write_csv`]. Classes are taken in
    /// `class_order` when given, otherwise in order of first appearance.
    pub fn read_csv(r: impl Read, class_order: Option<&[&str]>) -> Result<Self, MlError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let label_col = header
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| MlError::Format("missing `label` column".into()))?;
        let id_col = header.iter().position(|h| h == "id");
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&i| i != label_col && Some(i) != id_col).collect();
        let features = feature_cols.iter().map(|&i| header[i].clone()).collect();
        let mut rows = Vec::new();
        let mut names = Vec::new();
        let mut ids = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = feature_cols
                .iter()
                .map(|&i| {
                    let v = rec.get(i).unwrap_or("").trim();
                    if v.is_empty() {
                        Ok(0.0)
                    } else {
                        v.parse::<f64>()
                            .map_err(|_| MlError::Format(format!("row {}: bad number {v:?} in {}", line + 1, header[i])))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
            names.push(rec.get(label_col).unwrap_or("").to_string());
            if let Some(c) = id_col {
                ids.push(rec.get(c).unwrap_or("").to_string());
            }
        }
        let order: Vec<String> = match class_order {
            Some(o) => o.iter().map(|s| s.to_string()).collect(),
            None => {
                let mut seen: Vec<String> = Vec::new();
                for n in &names {
                    if !seen.contains(n) {
                        seen.push(n.clone());
                    }
                }
                seen
            }
        };
        let order_ref: Vec<&str> = order.iter().map(String::as_str).collect();
        let ds = Dataset::from_named(features, rows, &names, &order_ref)?;
        if id_col.is_some() {
            ds.with_ids(ids)
        } else {
            Ok(ds)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, f64::NAN], vec![2.0, 3.0], vec![0.5, -1.0]],
            vec![0, 1, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn imputes_and_counts() {
        let d = toy();
        assert_eq!(d.rows[0][1], 0.0);
        assert_eq!(d.class_counts(), vec![1, 2]);
        assert_eq!(d.column(0), vec![1.0, 2.0, 0.5]);
        assert_eq!(d.subset(&[2, 2]).labels, vec![1, 1]);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            Dataset::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![0], vec!["x".into()]),
            Err(MlError::RowWidth { .. })
        ));
        assert!(matches!(
            Dataset::new(vec!["a".into()], vec![vec![1.0]], vec![3], vec!["x".into()]),
            Err(MlError::LabelOutOfRange(3))
        ));
        assert!(matches!(
            Dataset::new(vec![], vec![vec![]], vec![], vec![]),
            Err(MlError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let d = toy().with_ids(vec!["u1".into(), "u2".into(), "u3".into()]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..], Some(&["x", "y"])).unwrap();
        assert_eq!(back, d);
        let inferred = Dataset::read_csv(&buf[..], None).unwrap();
        assert_eq!(inferred.class_names, vec!["x", "y"]);
        assert!(Dataset::read_csv(&buf[..], Some(&["x"])).is_err());
    }
}
