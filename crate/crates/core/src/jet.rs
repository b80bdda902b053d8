/// Value and first/second derivatives of a scalar field at one spacetime point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
    pub dtt: f64,
    pub dxt: f64,
}

impl FieldJet {
    /// `φ_tt − φ_xx + m²φ + εφ³`.
    pub fn kg_residual(&self, mass: f64, epsilon: f64) -> f64 {
        let v = self.value;
        self.dtt - self.dxx + mass * mass * v + epsilon * v * v * v
    }
}
