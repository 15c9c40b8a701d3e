use crate::error::Result;
use crate::grid::{Field, Grid};

/// State `(u, v, w)` of the switching system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFull {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
}

impl StateFull {
    pub fn new(t: f64, u: Field, v: Field, w: Field) -> Result<Self> {
        u.same_grid(&v)?;
        u.same_grid(&w)?;
        Ok(Self { t, u, v, w })
    }

    /// Splits a total density into exchange equilibrium,
    /// `u = theta n / (1 + theta)`, `v = n / (1 + theta)`.
    pub fn equilibrated(t: f64, n: &Field, w: Field, theta: f64) -> Result<Self> {
        let u = n.map(|x| theta * x / (1.0 + theta))?;
        let v = n.map(|x| x / (1.0 + theta))?;
        Self::new(t, u, v, w)
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn check_non_negative(&self) -> Result<()> {
        self.u.check_non_negative()?;
        self.v.check_non_negative()?;
        self.w.check_non_negative()
    }

    /// Largest cellwise total density `u + v`.
    pub fn max_n(&self) -> f64 {
        self.u
            .values()
            .iter()
            .zip(self.v.values())
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a + b))
    }
}

/// State `(n, w)` of the limit Keller-Segel system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLimit {
    pub t: f64,
    pub n: Field,
    pub w: Field,
}

impl StateLimit {
    pub fn new(t: f64, n: Field, w: Field) -> Result<Self> {
        n.same_grid(&w)?;
        Ok(Self { t, n, w })
    }

    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }

    pub fn check_non_negative(&self) -> Result<()> {
        self.n.check_non_negative()?;
        self.w.check_non_negative()
    }
}

/// One diagnostic row. Column order matches [`DiagRecord::HEADER`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagRecord {
    pub t: f64,
    pub mass_n: f64,
    pub l2_u: f64,
    pub l2_v: f64,
    pub l2_n: f64,
    pub w12_w: f64,
    pub linf_n: f64,
    pub entropy_u: f64,
    pub entropy_v: f64,
    pub liapunov: f64,
    pub dissipation: f64,
    pub e_l2: f64,
    pub p_gamma: f64,
}

impl DiagRecord {
    pub const HEADER: &'static str =
        "t,mass_n,l2_u,l2_v,l2_n,w12_w,linf_n,entropy_u,entropy_v,liapunov,dissipation,e_l2,p_gamma";

    pub fn columns(&self) -> [f64; 13] {
        [
            self.t,
            self.mass_n,
            self.l2_u,
            self.l2_v,
            self.l2_n,
            self.w12_w,
            self.linf_n,
            self.entropy_u,
            self.entropy_v,
            self.liapunov,
            self.dissipation,
            self.e_l2,
            self.p_gamma,
        ]
    }
}
