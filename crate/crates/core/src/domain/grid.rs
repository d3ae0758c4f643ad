use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::vocab::{TokenId, Vocab};
use super::{Color, DomainError, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub color: Color,
}

impl ObjectSpec {
    pub fn new(shape: u8, color: u8) -> Self {
        Self { shape: Shape(shape), color: Color(color) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CellCode {
    #[default]
    Background,
    Object(ObjectSpec),
}

impl CellCode {
    pub fn object(self) -> Option<ObjectSpec> {
        match self {
            CellCode::Background => None,
            CellCode::Object(o) => Some(o),
        }
    }
}

/// Decoded `height x width` grid of cell codes, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridImage {
    height: usize,
    width: usize,
    cells: Vec<CellCode>,
}

impl GridImage {
    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, cells: vec![CellCode::Background; height * width] }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<CellCode>) -> Result<Self, DomainError> {
        if cells.len() != height * width {
            return Err(DomainError::LengthMismatch { expected: height * width, got: cells.len() });
        }
        Ok(Self { height, width, cells })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[CellCode] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> CellCode {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cell: CellCode) {
        self.cells[row * self.width + col] = cell;
    }

    pub fn non_background(&self) -> usize {
        self.cells.iter().filter(|c| **c != CellCode::Background).count()
    }

    /// Re-encodes the grid into its row-major image-token list.
    pub fn encode(&self, vocab: &Vocab) -> Vec<TokenId> {
        self.cells.iter().map(|&c| vocab.image_token(c)).collect()
    }

    /// One row per line, numeric cell codes separated by single spaces.
    /// Code 0 is background; `1 + shape * n_colors + color` otherwise.
    pub fn to_text(&self, vocab: &Vocab) -> String {
        let mut out = String::new();
        for row in self.cells.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|&c| vocab.cell_index(c).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, vocab: &Vocab) -> Result<Self, DomainError> {
        let mut cells = Vec::new();
        let mut height = 0;
        let mut width = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut n = 0;
            for field in line.split_whitespace() {
                let idx: u32 = field.parse().map_err(|_| DomainError::Asset(format!("bad cell code `{field}`")))?;
                if idx >= vocab.image_range().len() as u32 {
                    return Err(DomainError::Asset(format!("cell code {idx} outside image alphabet")));
                }
                cells.push(vocab.cell_from_index(idx));
                n += 1;
            }
            match width {
                None => width = Some(n),
                Some(w) if w != n => return Err(DomainError::Asset(format!("ragged grid row {height}"))),
                _ => {}
            }
            height += 1;
        }
        Self::from_cells(height, width.unwrap_or(0), cells)
    }

    /// Compact one-glyph-per-cell drawing: `.` for background, otherwise the
    /// shape initial in upper case followed by the color digit.
    pub fn to_pretty(&self, shape_names: &[String], color_names: &[String]) -> String {
        let mut out = String::new();
        for row in self.cells.chunks(self.width) {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match c {
                    CellCode::Background => out.push_str(" ."),
                    CellCode::Object(o) => {
                        let s = shape_names.get(o.shape.0 as usize).and_then(|n| n.chars().next()).unwrap_or('?');
                        let c = color_names.get(o.color.0 as usize).and_then(|n| n.chars().next()).unwrap_or('?');
                        let _ = write!(out, "{}{}", s.to_ascii_uppercase(), c);
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Row-major decode of exactly `height * width` image tokens.
pub fn decode_image(tokens: &[TokenId], vocab: &Vocab, height: usize, width: usize) -> Result<GridImage, DomainError> {
    if tokens.len() != height * width {
        return Err(DomainError::LengthMismatch { expected: height * width, got: tokens.len() });
    }
    let cells = tokens.iter().map(|&t| vocab.cell_code(t)).collect::<Result<Vec<_>, _>>()?;
    Ok(GridImage { height, width, cells })
}
