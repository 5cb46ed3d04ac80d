//! A trained classifier and its versioned text file format.
//!
//! ```text
//! SAEv1
//! layer <visible> <hidden> <lambda> <beta> <rho>
//! <hidden rows of W1>
//! <b1>
//! <visible rows of W2>
//! <b2>
//! ...                     (one block per layer)
//! SOFTMAXv1
//! <k> <n> <lambda>
//! <k rows of n+1 values, intercept first>
//! GRID <rows> <cols>
//! ```
//!
//! Numbers are written with 17 significant digits so a saved model parses
//! back to identical bits.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::orientation::OrientationField;
use crate::sae::{LayerParams, SaeError, SaeHyper, StackedEncoder};
use crate::softmax::{self, SoftmaxError, SoftmaxModel};
use crate::ClassLabel;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("model has grid {rows}x{cols} ({expected} features) but the code size is {found}")]
    Grid {
        rows: usize,
        cols: usize,
        expected: usize,
        found: usize,
    },
    #[error("input grid is {found_rows}x{found_cols}, model expects {rows}x{cols}")]
    InputGrid {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error(transparent)]
    Sae(#[from] SaeError),
    #[error(transparent)]
    Softmax(#[from] SoftmaxError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: StackedEncoder,
    pub softmax: SoftmaxModel,
    /// Orientation grid the model was trained on, as `(rows, cols)`.
    pub grid: (usize, usize),
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row<'a>(s: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(' ');
        }
        first = false;
        s.push_str(&num(*v));
    }
    s.push('\n');
}

impl Model {
    /// Checks that the encoder, classifier and grid agree on sizes.
    pub fn new(encoder: StackedEncoder, softmax: SoftmaxModel, grid: (usize, usize)) -> Result<Self, ModelError> {
        let features = 2 * grid.0 * grid.1;
        let grid_err = |found| ModelError::Grid {
            rows: grid.0,
            cols: grid.1,
            expected: features,
            found,
        };
        if let Some(v) = encoder.input_dim() {
            if v != features {
                return Err(grid_err(v));
            }
        }
        let code = encoder.code_dim().unwrap_or(features);
        if softmax.features() != code {
            return Err(grid_err(softmax.features()));
        }
        Ok(Self { encoder, softmax, grid })
    }

    pub fn input_dim(&self) -> usize {
        2 * self.grid.0 * self.grid.1
    }

    pub fn check_field(&self, field: &OrientationField) -> Result<(), ModelError> {
        if (field.rows(), field.cols()) != self.grid {
            return Err(ModelError::InputGrid {
                rows: self.grid.0,
                cols: self.grid.1,
                found_rows: field.rows(),
                found_cols: field.cols(),
            });
        }
        Ok(())
    }

    /// Class probabilities for an encoded feature vector, sorted descending.
    pub fn rank_features(&self, features: &[f64]) -> Result<Vec<(ClassLabel, f64)>, ModelError> {
        let code = self.encoder.encode(features)?;
        Ok(softmax::classify(&self.softmax, &code)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("SAEv1\n");
        for (layer, hyper) in self.encoder.layers.iter().zip(&self.encoder.hypers) {
            let _ = writeln!(
                s,
                "layer {} {} {} {} {}",
                layer.visible(),
                layer.hidden(),
                num(hyper.lambda),
                num(hyper.beta),
                num(hyper.rho)
            );
            for row in layer.w1.rows() {
                push_row(&mut s, row);
            }
            push_row(&mut s, &layer.b1);
            for row in layer.w2.rows() {
                push_row(&mut s, row);
            }
            push_row(&mut s, &layer.b2);
        }
        let _ = writeln!(
            s,
            "SOFTMAXv1\n{} {} {}",
            self.softmax.classes(),
            self.softmax.features(),
            num(self.softmax.lambda)
        );
        for row in self.softmax.theta.rows() {
            push_row(&mut s, row);
        }
        let _ = writeln!(s, "GRID {} {}", self.grid.0, self.grid.1);
        s
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, reason: impl Into<String>) -> ModelError {
        ModelError::Syntax {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ModelError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => {
                self.line += 1;
                Err(self.err(format!("unexpected end of file, expected {what}")))
            }
        }
    }

    fn parse<T: FromStr>(&self, token: &str, what: &str) -> Result<T, ModelError> {
        token.parse().map_err(|_| self.err(format!("bad {what} {token:?}")))
    }

    fn row(&mut self, len: usize, what: &str) -> Result<Vec<f64>, ModelError> {
        let line = self.next(what)?;
        let values = line
            .split_ascii_whitespace()
            .map(|t| self.parse::<f64>(t, what))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != len {
            return Err(self.err(format!("{what} has {} values, expected {len}", values.len())));
        }
        Ok(values)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>, ModelError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols, what)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"))
    }
}

impl FromStr for Model {
    type Err = ModelError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            line: 0,
        };
        if lines.next("header")? != "SAEv1" {
            return Err(lines.err("expected SAEv1 header"));
        }
        let mut layers = Vec::new();
        let mut hypers = Vec::new();
        let mut line = lines.next("layer or SOFTMAXv1")?;
        while line != "SOFTMAXv1" {
            let tok: Vec<&str> = line.split_ascii_whitespace().collect();
            if tok.len() != 6 || tok[0] != "layer" {
                return Err(lines.err("expected `layer <visible> <hidden> <lambda> <beta> <rho>`"));
            }
            let v: usize = lines.parse(tok[1], "visible size")?;
            let h: usize = lines.parse(tok[2], "hidden size")?;
            let hyper = SaeHyper {
                lambda: lines.parse(tok[3], "lambda")?,
                beta: lines.parse(tok[4], "beta")?,
                rho: lines.parse(tok[5], "rho")?,
                ..SaeHyper::default()
            };
            let w1 = lines.matrix(h, v, "W1 row")?;
            let b1 = Array1::from(lines.row(h, "b1")?);
            let w2 = lines.matrix(v, h, "W2 row")?;
            let b2 = Array1::from(lines.row(v, "b2")?);
            layers.push(LayerParams { w1, b1, w2, b2 });
            hypers.push(hyper);
            line = lines.next("layer or SOFTMAXv1")?;
        }
        let head = lines.next("softmax shape")?;
        let tok: Vec<&str> = head.split_ascii_whitespace().collect();
        if tok.len() != 3 {
            return Err(lines.err("expected `<k> <n> <lambda>`"));
        }
        let k: usize = lines.parse(tok[0], "class count")?;
        let n: usize = lines.parse(tok[1], "feature count")?;
        let lambda: f64 = lines.parse(tok[2], "lambda")?;
        let theta = lines.matrix(k, n + 1, "softmax row")?;
        let grid_line = lines.next("GRID line")?;
        let tok: Vec<&str> = grid_line.split_ascii_whitespace().collect();
        if tok.len() != 3 || tok[0] != "GRID" {
            return Err(lines.err("expected `GRID <rows> <cols>`"));
        }
        let grid = (lines.parse(tok[1], "grid rows")?, lines.parse(tok[2], "grid cols")?);
        if let Ok(extra) = lines.next("") {
            if !extra.trim().is_empty() {
                return Err(lines.err("trailing content"));
            }
        }
        let encoder = StackedEncoder::new(layers, hypers)?;
        Model::new(encoder, SoftmaxModel::new(theta, lambda)?, grid)
    }
}
