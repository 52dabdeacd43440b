use nalgebra::DMatrix;

/// Source of the additive process noise used in the time update.
pub trait ProcessNoise: Send + Sync {
    /// Process noise covariance accumulated over `duration` seconds.
    fn process_noise(&self, duration: f64) -> DMatrix<f64>;
}

/// Covariance growing linearly with time at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantQ {
    rate: DMatrix<f64>,
}

impl ConstantQ {
    /// `rate` is the covariance added per second.
    pub fn new(rate: DMatrix<f64>) -> Self {
        Self { rate }
    }

    pub fn rate(&self) -> &DMatrix<f64> {
        &self.rate
    }
}

impl ProcessNoise for ConstantQ {
    fn process_noise(&self, duration: f64) -> DMatrix<f64> {
        &self.rate * duration
    }
}
