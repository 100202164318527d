//! Central numeric policy. Every tolerance the kernel and the solvers use
//! lives here so they can be audited and overridden in one place.

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Target |g(z)| after root polishing.
    pub root_residual: f64,
    /// Counting contour radius is `1 - contour_eps`.
    pub contour_eps: f64,
    /// Relative residual accepted from linear solves.
    pub linear_residual: f64,
    /// A pivot below this fraction of its row scale means singular.
    pub pivot_rel_tol: f64,
    /// Rank decision threshold for null spaces at determinant roots.
    pub rank_tol: f64,
    /// Loads at or above this are refused (root clustering near |z|=1).
    pub max_load: f64,
    /// Default jet truncation order for moment extraction.
    pub jet_order: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root_residual: 1e-10,
            contour_eps: 1e-6,
            linear_residual: 1e-10,
            pivot_rel_tol: 1e-14,
            rank_tol: 1e-8,
            max_load: 0.999,
            jet_order: 4,
        }
    }
}

impl Tolerances {
    pub fn with_jet_order(mut self, order: usize) -> Self {
        assert!(order >= 2, "moment extraction needs order >= 2");
        self.jet_order = order;
        self
    }
}
