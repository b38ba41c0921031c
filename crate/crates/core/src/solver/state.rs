use crate::error::{Error, Result};

/// Cell-averaged edge densities plus buffer contents at time `t`.
///
/// Edge `e` occupies `cells[e * n .. (e + 1) * n]`; cell 0 is at the head.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    n: usize,
    pub cells: Vec<f64>,
    pub buffers: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn zeros(num_edges: usize, num_buffers: usize, n: usize) -> Self {
        Self {
            n,
            cells: vec![0.0; num_edges * n],
            buffers: vec![0.0; num_buffers],
            t: 0.0,
        }
    }

    pub fn from_parts(n: usize, cells: Vec<f64>, buffers: Vec<f64>) -> Result<Self> {
        if n == 0 || cells.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: cells.len(),
            });
        }
        Ok(Self {
            n,
            cells,
            buffers,
            t: 0.0,
        })
    }

    pub fn cells_per_edge(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.cells.len() / self.n
    }

    pub fn num_buffers(&self) -> usize {
        self.buffers.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn edge(&self, e: usize) -> &[f64] {
        &self.cells[e * self.n..(e + 1) * self.n]
    }

    pub fn edge_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.cells[e * self.n..(e + 1) * self.n]
    }

    /// `Σ_e dx Σ_i u_{e,i} + Σ_v b_v`.
    pub fn total_mass(&self) -> f64 {
        self.dx() * self.cells.iter().sum::<f64>() + self.buffers.iter().sum::<f64>()
    }

    /// Weighted l1 norm, the norm of the state space.
    pub fn norm(&self) -> f64 {
        self.dx() * self.cells.iter().map(|v| v.abs()).sum::<f64>()
            + self.buffers.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn min_value(&self) -> f64 {
        self.cells
            .iter()
            .chain(&self.buffers)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn edge_masses(&self) -> Vec<f64> {
        let dx = self.dx();
        self.cells.chunks(self.n).map(|c| dx * c.iter().sum::<f64>()).collect()
    }

    pub fn same_shape(&self, other: &FlowState) -> Result<()> {
        if self.n != other.n || self.cells.len() != other.cells.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cells.len(),
                found: other.cells.len(),
            });
        }
        if self.buffers.len() != other.buffers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.buffers.len(),
                found: other.buffers.len(),
            });
        }
        Ok(())
    }

    /// Norm of `self − other`.
    pub fn distance(&self, other: &FlowState) -> Result<f64> {
        self.same_shape(other)?;
        let cells: f64 = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let buffers: f64 = self
            .buffers
            .iter()
            .zip(&other.buffers)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(self.dx() * cells + buffers)
    }

    pub fn scaled(&self, factor: f64) -> FlowState {
        FlowState {
            n: self.n,
            cells: self.cells.iter().map(|v| v * factor).collect(),
            buffers: self.buffers.iter().map(|v| v * factor).collect(),
            t: self.t,
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &FlowState) -> Result<FlowState> {
        self.same_shape(other)?;
        Ok(FlowState {
            n: self.n,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a + factor * b).collect(),
            buffers: self
                .buffers
                .iter()
                .zip(&other.buffers)
                .map(|(a, b)| a + factor * b)
                .collect(),
            t: self.t,
        })
    }

    /// Flattened `[cells…, buffers…]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.cells.iter().chain(&self.buffers).copied().collect()
    }

    pub fn reshape_like(&self, flat: &[f64]) -> FlowState {
        let split = self.cells.len();
        FlowState {
            n: self.n,
            cells: flat[..split].to_vec(),
            buffers: flat[split..].to_vec(),
            t: self.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_arithmetic() {
        assert_eq!(FlowState::zeros(2, 1, 16).total_mass(), 0.0);
        let mut s = FlowState::zeros(2, 1, 16);
        s.cells.iter_mut().for_each(|v| *v = 1.0);
        s.buffers[0] = 0.5;
        assert_eq!(s.total_mass(), 2.5);
        assert_eq!(s.edge_masses(), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_ragged_cells() {
        assert!(FlowState::from_parts(4, vec![0.0; 6], vec![]).is_err());
    }
}
