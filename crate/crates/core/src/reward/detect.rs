use serde::{Deserialize, Serialize};

use crate::domain::{CellCode, Direction, GridImage, ObjectSpec};

/// Inclusive cell bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl BoundingBox {
    pub fn area(&self) -> usize {
        (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)
    }

    pub fn intersection(&self, other: &BoundingBox) -> usize {
        let r0 = self.row_min.max(other.row_min);
        let r1 = self.row_max.min(other.row_max);
        let c0 = self.col_min.max(other.col_min);
        let c1 = self.col_max.min(other.col_max);
        if r0 > r1 || c0 > c1 {
            0
        } else {
            (r1 - r0 + 1) * (c1 - c0 + 1)
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub query: ObjectSpec,
    pub found: bool,
    pub bbox: Option<BoundingBox>,
    /// Mean `(row, col)` of matching cells.
    pub centroid: Option<(f64, f64)>,
    /// Number of 4-connected components of matching cells.
    pub count: usize,
}

/// Exact-match detector over grid cells.
pub fn detect(grid: &GridImage, query: ObjectSpec) -> Detection {
    let (h, w) = (grid.height(), grid.width());
    let target = CellCode::Object(query);
    let cells = grid.cells();
    let mut n = 0usize;
    let (mut row_sum, mut col_sum) = (0usize, 0usize);
    let mut bbox = BoundingBox { row_min: usize::MAX, row_max: 0, col_min: usize::MAX, col_max: 0 };
    for (i, cell) in cells.iter().enumerate() {
        if *cell == target {
            let (r, c) = (i / w, i % w);
            n += 1;
            row_sum += r;
            col_sum += c;
            bbox.row_min = bbox.row_min.min(r);
            bbox.row_max = bbox.row_max.max(r);
            bbox.col_min = bbox.col_min.min(c);
            bbox.col_max = bbox.col_max.max(c);
        }
    }
    if n == 0 {
        return Detection { query, found: false, bbox: None, centroid: None, count: 0 };
    }
    let centroid = (row_sum as f64 / n as f64, col_sum as f64 / n as f64);

    let mut seen = vec![false; h * w];
    let mut stack = Vec::with_capacity(n);
    let mut count = 0;
    for start in 0..h * w {
        if seen[start] || cells[start] != target {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
            for (nr, nc) in neighbours {
                if nr >= h || nc >= w {
                    continue;
                }
                let j = nr * w + nc;
                if !seen[j] && cells[j] == target {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Detection { query, found: true, bbox: Some(bbox), centroid: Some(centroid), count }
}

/// Signed displacement of subject relative to object along the queried
/// axis; positive means the relation holds.
pub fn displacement(subject: (f64, f64), object: (f64, f64), direction: Direction) -> f64 {
    match direction {
        Direction::LeftOf => object.1 - subject.1,
        Direction::RightOf => subject.1 - object.1,
        Direction::Above => object.0 - subject.0,
        Direction::Below => subject.0 - object.0,
    }
}

/// 1 when the subject lies more than `tau` cells in the queried direction,
/// 0 when it lies on the wrong side, otherwise the IoU of the two boxes.
/// Either detection missing scores 0.
pub fn spatial_score(subject: &Detection, object: &Detection, direction: Direction, tau: f64) -> f64 {
    let (Some(cs), Some(co), Some(bs), Some(bo)) = (subject.centroid, object.centroid, subject.bbox, object.bbox) else {
        return 0.0;
    };
    let d = displacement(cs, co, direction);
    if d > tau {
        1.0
    } else if d < 0.0 {
        0.0
    } else {
        bs.iou(&bo)
    }
}
