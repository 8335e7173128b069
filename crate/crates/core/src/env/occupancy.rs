use serde::{Deserialize, Serialize};

use crate::workload::{Job, NUM_RESOURCES};

/// Cluster occupancy over the visible horizon.
///
/// Cells are indexed `[resource][row][unit]`; row 0 is the current timestep.
/// Each cell is empty or holds the id of the job reserving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    horizon: usize,
    r: usize,
    cells: Vec<Option<u32>>,
    used: Vec<u32>,
}

impl Occupancy {
    pub fn new(horizon: usize, r: usize) -> Self {
        Occupancy {
            horizon,
            r,
            cells: vec![None; NUM_RESOURCES * horizon * r],
            used: vec![0; NUM_RESOURCES * horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn capacity(&self) -> usize {
        self.r
    }

    /// Occupied units of `resource` at future step `row`.
    pub fn used(&self, resource: usize, row: usize) -> u32 {
        self.used[resource * self.horizon + row]
    }

    pub fn free(&self, resource: usize, row: usize) -> u32 {
        self.r as u32 - self.used(resource, row)
    }

    pub fn cell(&self, resource: usize, row: usize, unit: usize) -> Option<u32> {
        self.cells[(resource * self.horizon + row) * self.r + unit]
    }

    pub fn fits_at(&self, job: &Job, offset: usize) -> bool {
        let duration = job.duration as usize;
        if offset + duration > self.horizon {
            return false;
        }
        (offset..offset + duration).all(|row| {
            (0..NUM_RESOURCES).all(|k| self.free(k, row) >= job.demand[k])
        })
    }

    /// Smallest offset at which `job` fits for its whole duration.
    pub fn earliest_fit(&self, job: &Job) -> Option<usize> {
        let duration = job.duration as usize;
        if duration > self.horizon {
            return None;
        }
        (0..=self.horizon - duration).find(|&d| self.fits_at(job, d))
    }

    /// Reserves the leftmost free units in rows `offset..offset + duration`.
    /// The caller must have checked [`fits_at`](Self::fits_at).
    pub fn allocate(&mut self, job: &Job, offset: usize) {
        debug_assert!(self.fits_at(job, offset));
        for row in offset..offset + job.duration as usize {
            for (k, &need) in job.demand.iter().enumerate() {
                let base = (k * self.horizon + row) * self.r;
                let mut left = need;
                for cell in &mut self.cells[base..base + self.r] {
                    if left == 0 {
                        break;
                    }
                    if cell.is_none() {
                        *cell = Some(job.id);
                        left -= 1;
                    }
                }
                self.used[k * self.horizon + row] += need;
            }
        }
    }

    /// Advances one timestep: row 0 is discarded and an empty row enters at
    /// the bottom.
    pub fn shift(&mut self) {
        let (h, r) = (self.horizon, self.r);
        for k in 0..NUM_RESOURCES {
            let block = &mut self.cells[k * h * r..(k + 1) * h * r];
            block.copy_within(r.., 0);
            block[(h - 1) * r..].fill(None);
            let used = &mut self.used[k * h..(k + 1) * h];
            used.copy_within(1.., 0);
            used[h - 1] = 0;
        }
    }

    /// Number of cells of `resource` in `row` held by `job_id`.
    pub fn cells_held(&self, resource: usize, row: usize, job_id: u32) -> usize {
        let base = (resource * self.horizon + row) * self.r;
        self.cells[base..base + self.r]
            .iter()
            .filter(|c| **c == Some(job_id))
            .count()
    }

    pub fn count_row(&self, resource: usize, row: usize) -> usize {
        let base = (resource * self.horizon + row) * self.r;
        self.cells[base..base + self.r].iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.used.iter().all(|&u| u == 0)
    }
}
