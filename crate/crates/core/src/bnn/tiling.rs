use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::layer::BnnLayer;
use crate::error::{Error, Result};

/// How the tiles of one output column are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialSum {
    /// One row tile: threshold directly on the ScL voltage.
    Analog,
    /// Several row tiles: read each out as a match count, add, threshold.
    Digital,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    /// Macro this tile is programmed into.
    pub macro_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub layer_rows: usize,
    pub layer_cols: usize,
    pub macro_rows: usize,
    pub macro_cols: usize,
    pub row_tiles: usize,
    pub col_tiles: usize,
    /// Row-tile-major: tile `(i, j)` sits at index `i * col_tiles + j`.
    pub tiles: Vec<Tile>,
    pub combine: PartialSum,
}

impl TilePlan {
    pub fn tile(&self, row_tile: usize, col_tile: usize) -> &Tile {
        &self.tiles[row_tile * self.col_tiles + col_tile]
    }
}

/// Splits a layer's lowered weight matrix into macro-sized tiles.
pub fn map_layer(layer: &BnnLayer, macro_rows: usize, macro_cols: usize) -> Result<TilePlan> {
    if macro_rows == 0 || macro_cols == 0 {
        return Err(Error::domain("macro dimensions must be at least 1"));
    }
    let (rows, cols) = (layer.rows(), layer.cols());
    let row_tiles = rows.div_ceil(macro_rows);
    let col_tiles = cols.div_ceil(macro_cols);
    let mut tiles = Vec::with_capacity(row_tiles * col_tiles);
    for i in 0..row_tiles {
        for j in 0..col_tiles {
            tiles.push(Tile {
                rows: i * macro_rows..((i + 1) * macro_rows).min(rows),
                cols: j * macro_cols..((j + 1) * macro_cols).min(cols),
                macro_index: tiles.len(),
            });
        }
    }
    Ok(TilePlan {
        layer_rows: rows,
        layer_cols: cols,
        macro_rows,
        macro_cols,
        row_tiles,
        col_tiles,
        tiles,
        combine: if row_tiles == 1 {
            PartialSum::Analog
        } else {
            PartialSum::Digital
        },
    })
}
