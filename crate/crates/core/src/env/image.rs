use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EnvConfig, EnvState};
use crate::workload::NUM_RESOURCES;

/// Binary `[time_horizon × width]` rendering of the scheduler state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u8>,
}

impl StateImage {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        StateImage {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize) {
        self.data[row * self.cols + col] = 1;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Plain-text PGM (P2), 1 = white.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n1\n", self.cols, self.rows);
        for row in self.data.chunks(self.cols) {
            let line: Vec<&str> = row.iter().map(|&v| if v != 0 { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.cols) {
            let line: Vec<&str> = row.iter().map(|&v| if v != 0 { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Column layout of the state image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageLayout {
    pub rows: usize,
    pub r: usize,
    pub num_slots: usize,
    pub backlog_cols: usize,
}

impl ImageLayout {
    pub fn of(config: &EnvConfig) -> Self {
        ImageLayout {
            rows: config.time_horizon,
            r: config.r as usize,
            num_slots: config.num_slots,
            backlog_cols: config.backlog_capacity.div_ceil(config.time_horizon),
        }
    }

    /// Columns spanned by one resource: its cluster block plus one block per slot.
    pub fn resource_width(&self) -> usize {
        self.r * (1 + self.num_slots)
    }

    pub fn width(&self) -> usize {
        NUM_RESOURCES * self.resource_width() + self.backlog_cols
    }

    pub fn cluster_col(&self, resource: usize) -> usize {
        resource * self.resource_width()
    }

    pub fn slot_col(&self, resource: usize, slot: usize) -> usize {
        resource * self.resource_width() + self.r * (1 + slot)
    }

    pub fn backlog_col(&self) -> usize {
        NUM_RESOURCES * self.resource_width()
    }
}

pub fn render_image(state: &EnvState, config: &EnvConfig) -> StateImage {
    let layout = ImageLayout::of(config);
    let mut img = StateImage::zeros(layout.rows, layout.width());
    let occ = &state.occupancy;
    for k in 0..NUM_RESOURCES {
        let base = layout.cluster_col(k);
        for row in 0..layout.rows {
            for c in 0..occ.used(k, row) as usize {
                img.set(row, base + c);
            }
        }
        for (s, slot) in state.slots.iter().enumerate() {
            if let Some(job) = slot {
                let base = layout.slot_col(k, s);
                for row in 0..(job.duration as usize).min(layout.rows) {
                    for c in 0..job.demand[k] as usize {
                        img.set(row, base + c);
                    }
                }
            }
        }
    }
    let base = layout.backlog_col();
    for i in 0..state.backlog.len().min(layout.backlog_cols * layout.rows) {
        img.set(i % layout.rows, base + i / layout.rows);
    }
    img
}
