//! Binary ±1 pixel grids and their plain-text file format.
//!
//! One row per line, entries `+1` / `-1` separated by whitespace.

use std::fmt::Write as _;

use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    rows: usize,
    cols: usize,
    pixels: Vec<i8>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<i8>) -> Result<Self, Error> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("image must be non-empty, got {rows}x{cols}")));
        }
        if pixels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} pixels for a {rows}x{cols} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| v.abs() != 1) {
            return Err(Error::Dimension(format!("pixel value {bad} is not +1/-1")));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: i8) -> Result<Self, Error> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[i8] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.pixels[r * self.cols + c]
    }

    pub fn flip(&mut self, index: usize) {
        self.pixels[index] = -self.pixels[index];
    }

    /// Row-major index of every pixel that differs from `other`.
    pub fn diff(&self, other: &Image) -> Vec<usize> {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }

    /// Quarter turn clockwise.
    pub fn rotate90(&self) -> Image {
        let (rows, cols) = (self.cols, self.rows);
        let mut pixels = vec![0; rows * cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                pixels[c * cols + (self.rows - 1 - r)] = self.get(r, c);
            }
        }
        Image { rows, cols, pixels }
    }

    /// Mirror left-right.
    pub fn mirror(&self) -> Image {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for r in 0..self.rows {
            for c in (0..self.cols).rev() {
                pixels.push(self.get(r, c));
            }
        }
        Image { rows: self.rows, cols: self.cols, pixels }
    }

    pub fn parse(text: &str) -> Result<Image, Error> {
        let mut rows = 0;
        let mut cols = None;
        let mut pixels = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let before = pixels.len();
            for tok in line.split_whitespace() {
                pixels.push(match tok {
                    "+1" | "1" => 1,
                    "-1" => -1,
                    other => {
                        return Err(Error::Dimension(format!("line {}: bad pixel `{other}`", idx + 1)))
                    }
                });
            }
            let width = pixels.len() - before;
            match cols {
                None => cols = Some(width),
                Some(c) if c != width => {
                    return Err(Error::Dimension(format!(
                        "line {}: {width} pixels, expected {c}",
                        idx + 1
                    )))
                }
                _ => {}
            }
            rows += 1;
        }
        Image::new(rows, cols.unwrap_or(0), pixels)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", if self.get(r, c) > 0 { "+1" } else { "-1" });
            }
            out.push('\n');
        }
        out
    }
}
