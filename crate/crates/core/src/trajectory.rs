use crate::jumps::TimeSeries;

/// A sampled observable of one simulated realization.
///
/// For the three-level model `values` is the Rydberg population `ρ_rr + ρ_ss`,
/// for the two-level model the density `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Drops samples earlier than `t_min`.
    pub fn discard_before(&self, t_min: f64) -> Trajectory {
        let first = self.times.partition_point(|&t| t < t_min);
        Trajectory {
            times: self.times[first..].to_vec(),
            values: self.values[first..].to_vec(),
            seed: self.seed,
            index: self.index,
        }
    }

    pub fn to_series(&self) -> TimeSeries {
        TimeSeries::new_unchecked(self.times.clone(), self.values.clone())
    }
}
