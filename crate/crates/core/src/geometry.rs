//! Problem instance and fading-averaged SNR/capacity conversions.
//!
//! Every function here is pure. Locations are stored as two-component
//! [`Point`]s; one-dimensional areas keep the second component at zero so
//! Euclidean distances stay correct without branching on the dimension.

use std::f64::consts::LN_10;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in meters. One-dimensional scenarios keep `y == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(pub [f64; 2]);

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self([x, y])
    }

    pub const fn on_line(x: f64) -> Self {
        Self([x, 0.0])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.0[0] - other.0[0]).hypot(self.0[1] - other.0[1])
    }

    pub fn l1_distance(&self, other: &Point) -> f64 {
        (self.0[0] - other.0[0]).abs() + (self.0[1] - other.0[1]).abs()
    }

    pub fn squared_distance(&self, other: &Point) -> f64 {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        dx * dx + dy * dy
    }

    /// The first `dim` coordinates.
    pub fn coords(&self, dim: usize) -> &[f64] {
        &self.0[..dim]
    }

    /// Builds a point from one or two coordinates; missing ones are zero.
    pub fn from_coords(coords: &[f64]) -> Self {
        match coords {
            [] => Self::default(),
            [x] => Self::on_line(*x),
            [x, y, ..] => Self::new(*x, *y),
        }
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        match v.as_slice() {
            [x] => Ok(Self::on_line(*x)),
            [x, y] => Ok(Self::new(*x, *y)),
            other => Err(format!("a point needs 1 or 2 coordinates, got {}", other.len())),
        }
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0.to_vec()
    }
}

/// Axis-aligned cell area anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Area {
    /// `[0, length]` meters.
    Segment { length: f64 },
    /// `[0, width] x [0, height]` meters.
    Rectangle { width: f64, height: f64 },
}

impl Area {
    /// Spatial dimension q.
    pub fn dim(&self) -> usize {
        match self {
            Area::Segment { .. } => 1,
            Area::Rectangle { .. } => 2,
        }
    }

    /// Length or surface, in m or m².
    pub fn measure(&self) -> f64 {
        match *self {
            Area::Segment { length } => length,
            Area::Rectangle { width, height } => width * height,
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            Area::Segment { length } => Point::on_line(length / 2.0),
            Area::Rectangle { width, height } => Point::new(width / 2.0, height / 2.0),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Area::Segment { length } => (0.0..=length).contains(&p.x()) && p.y() == 0.0,
            Area::Rectangle { width, height } => {
                (0.0..=width).contains(&p.x()) && (0.0..=height).contains(&p.y())
            }
        }
    }

    /// Uniform draw inside the area.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Area::Segment { length } => Point::on_line(rng.random::<f64>() * length),
            Area::Rectangle { width, height } => {
                let x = rng.random::<f64>() * width;
                let y = rng.random::<f64>() * height;
                Point::new(x, y)
            }
        }
    }

    /// Cell-midpoint grid with `n` points per axis.
    pub fn grid(&self, n: usize) -> Vec<Point> {
        match *self {
            Area::Segment { length } => {
                let step = length / n as f64;
                (0..n).map(|i| Point::on_line((i as f64 + 0.5) * step)).collect()
            }
            Area::Rectangle { width, height } => {
                let (sx, sy) = (width / n as f64, height / n as f64);
                let mut out = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        out.push(Point::new((i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy));
                    }
                }
                out
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Area::Segment { length } => length > 0.0 && length.is_finite(),
            Area::Rectangle { width, height } => {
                width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!("degenerate area {self:?}")))
        }
    }
}

/// Demanded ergodic capacity Γ_d(x) in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandField {
    /// Affine in the projection of `x` onto the segment `from -> to`; the
    /// projection is clamped to the segment so values stay between the anchors.
    LinearRamp {
        from: Point,
        to: Point,
        from_value: f64,
        to_value: f64,
    },
    /// Affine in the distance to `center`, reaching `border_value` at `radius`
    /// and held there beyond it.
    RadialRamp {
        center: Point,
        center_value: f64,
        border_value: f64,
        radius: f64,
    },
    /// Nearest tabulated sample (first one wins on ties).
    Tabulated { samples: Vec<(Point, f64)> },
}

impl DemandField {
    pub fn capacity_at(&self, p: &Point) -> f64 {
        match self {
            DemandField::LinearRamp {
                from,
                to,
                from_value,
                to_value,
            } => {
                let (dx, dy) = (to.x() - from.x(), to.y() - from.y());
                let len2 = dx * dx + dy * dy;
                let t = ((p.x() - from.x()) * dx + (p.y() - from.y()) * dy) / len2;
                let t = t.clamp(0.0, 1.0);
                from_value + t * (to_value - from_value)
            }
            DemandField::RadialRamp {
                center,
                center_value,
                border_value,
                radius,
            } => {
                let t = (p.distance(center) / radius).min(1.0);
                center_value + t * (border_value - center_value)
            }
            DemandField::Tabulated { samples } => {
                let mut best = (f64::INFINITY, 0.0);
                for (q, v) in samples {
                    let d = p.squared_distance(q);
                    if d < best.0 {
                        best = (d, *v);
                    }
                }
                best.1
            }
        }
    }

    /// Largest value the field can take.
    pub fn max_capacity(&self) -> f64 {
        match self {
            DemandField::LinearRamp {
                from_value,
                to_value,
                ..
            } => from_value.max(*to_value),
            DemandField::RadialRamp {
                center_value,
                border_value,
                ..
            } => center_value.max(*border_value),
            DemandField::Tabulated { samples } => samples
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(format!("demand field: {msg}")));
        match self {
            DemandField::LinearRamp {
                from,
                to,
                from_value,
                to_value,
            } => {
                if from.squared_distance(to) == 0.0 {
                    return bad("ramp anchors coincide");
                }
                if !(*from_value >= 0.0 && *to_value >= 0.0) {
                    return bad("ramp values must be non-negative");
                }
            }
            DemandField::RadialRamp {
                center_value,
                border_value,
                radius,
                ..
            } => {
                if !(*radius > 0.0) {
                    return bad("radius must be positive");
                }
                if !(*center_value >= 0.0 && *border_value >= 0.0) {
                    return bad("ramp values must be non-negative");
                }
            }
            DemandField::Tabulated { samples } => {
                if samples.is_empty() {
                    return bad("no tabulated samples");
                }
                if samples.iter().any(|(_, v)| !(*v >= 0.0)) {
                    return bad("tabulated values must be non-negative");
                }
            }
        }
        Ok(())
    }
}

/// The full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area: Area,
    /// Path-loss exponent α.
    pub alpha: f64,
    /// Minimum user-RAU distance, meters.
    pub d_min: f64,
    /// σ_ζ², watts.
    pub noise_power: f64,
    /// Shadowing standard deviation σ_s, dB.
    pub shadow_sigma_db: f64,
    /// M.
    pub antennas_per_rau: usize,
    /// K.
    pub num_raus: usize,
    /// p_tx^sum, watts.
    pub sum_power: f64,
    /// Capacity margin δ, bits/s/Hz.
    pub delta: f64,
    pub demand: DemandField,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        self.demand.validate()?;
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(2.0..=6.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [2, 6], got {}", self.alpha));
        }
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return bad(format!("d_min must be positive, got {}", self.d_min));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad(format!("noise power must be positive, got {}", self.noise_power));
        }
        if !(self.sum_power > 0.0 && self.sum_power.is_finite()) {
            return bad(format!("sum power must be positive, got {}", self.sum_power));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return bad(format!("shadow sigma must be >= 0, got {}", self.shadow_sigma_db));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if self.antennas_per_rau == 0 {
            return bad("antennas per RAU must be >= 1".into());
        }
        if self.num_raus == 0 {
            return bad("number of RAUs must be >= 1".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.area.dim()
    }

    /// ḡ, identical for every RAU.
    pub fn mean_small_scale(&self) -> f64 {
        mean_small_scale(self.antennas_per_rau)
    }

    /// s̄, identical for every RAU.
    pub fn mean_shadow(&self) -> f64 {
        mean_shadow(self.shadow_sigma_db)
    }

    pub fn path_loss(&self, d: f64) -> f64 {
        path_loss(d, self.alpha, self.d_min)
    }

    /// Fading-averaged SNR θ̄_a(x) with identical per-RAU fading means.
    pub fn avg_snr(&self, x: &Point, placement: &Placement) -> f64 {
        let k = placement.len();
        avg_snr(
            x,
            placement,
            self,
            &vec![self.mean_small_scale(); k],
            &vec![self.mean_shadow(); k],
        )
    }

    /// Noise power at which one RAU radiating the whole budget delivers the
    /// peak demanded SNR (on average) at ten times `d_min`.
    pub fn calibrated_noise_power(&self) -> Result<f64> {
        let theta_max = capacity_to_snr(self.demand.max_capacity())?;
        if theta_max <= 0.0 {
            return Err(Error::InvalidScenario(
                "cannot calibrate noise against an all-zero demand".into(),
            ));
        }
        let gain = self.mean_small_scale() * self.mean_shadow();
        Ok(self.sum_power * gain * path_loss(10.0 * self.d_min, self.alpha, self.d_min) / theta_max)
    }

    /// Demand sample at `x`.
    pub fn demand_sample(&self, x: Point) -> Result<DemandSample> {
        DemandSample::new(x, self.demand.capacity_at(&x))
    }
}

/// A user location with its demanded capacity and SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandSample {
    pub x: Point,
    /// Γ_d(x), bits/s/Hz.
    pub gamma_d: f64,
    /// θ̄_d(x) = 2^Γ_d − 1.
    pub theta_d: f64,
}

impl DemandSample {
    pub fn new(x: Point, gamma_d: f64) -> Result<Self> {
        Ok(Self {
            x,
            gamma_d,
            theta_d: capacity_to_snr(gamma_d)?,
        })
    }
}

/// RAU sites and transmit powers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub locations: Vec<Point>,
    pub powers: Vec<f64>,
}

impl Placement {
    pub fn new(locations: Vec<Point>, powers: Vec<f64>) -> Self {
        assert_eq!(locations.len(), powers.len(), "one power per RAU");
        Self { locations, powers }
    }

    /// Splits `sum_power` evenly over the sites.
    pub fn equal_split(locations: Vec<Point>, sum_power: f64) -> Self {
        let p = sum_power / locations.len() as f64;
        let powers = vec![p; locations.len()];
        Self { locations, powers }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn with_powers(&self, powers: Vec<f64>) -> Self {
        Self::new(self.locations.clone(), powers)
    }

    /// Distance from `x` to the closest RAU.
    pub fn nearest_distance(&self, x: &Point) -> f64 {
        self.locations
            .iter()
            .map(|c| c.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the sum-power budget and that every site lies in `area`.
    pub fn validate(&self, area: &Area, sum_power: f64) -> Result<()> {
        if self.powers.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidScenario("RAU powers must be positive".into()));
        }
        if self.total_power() > sum_power * (1.0 + 1e-9) {
            return Err(Error::InvalidScenario(format!(
                "total power {} exceeds budget {}",
                self.total_power(),
                sum_power
            )));
        }
        if let Some(c) = self.locations.iter().find(|c| !area.contains(c)) {
            return Err(Error::InvalidScenario(format!("RAU at {c:?} lies outside the area")));
        }
        Ok(())
    }
}

/// Linear path gain `min(d_min^-α, d^-α)`.
pub fn path_loss(d: f64, alpha: f64, d_min: f64) -> f64 {
    d.max(d_min).powf(-alpha)
}

/// Lipschitz constant of [`path_loss`] on `[lower, ∞)`, `lower >= d_min`.
pub fn path_loss_lipschitz(alpha: f64, lower: f64) -> f64 {
    alpha / lower.powf(alpha + 1.0)
}

/// θ = 2^Γ − 1.
pub fn capacity_to_snr(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::NegativeCapacity(gamma));
    }
    Ok(gamma.exp2() - 1.0)
}

/// Γ = log₂(1 + θ).
pub fn snr_to_capacity(theta: f64) -> f64 {
    theta.ln_1p() / std::f64::consts::LN_2
}

/// E[10^(z/10)] for z ~ N(0, σ_s²).
pub fn mean_shadow(shadow_sigma_db: f64) -> f64 {
    let s = shadow_sigma_db * LN_10 / 10.0;
    (s * s / 2.0).exp()
}

/// E[Σ_m |h_m|²] for M unit-variance Rayleigh taps.
pub fn mean_small_scale(antennas: usize) -> f64 {
    antennas as f64
}

/// Fading-averaged SNR at `x`:
/// `(1/σ²) Σ_k p_k s̄_k ḡ_k φ(‖x − c_k‖)`, clamped path loss throughout.
pub fn avg_snr(
    x: &Point,
    placement: &Placement,
    scenario: &Scenario,
    mean_small_scale: &[f64],
    mean_shadow: &[f64],
) -> f64 {
    let sum: f64 = placement
        .locations
        .iter()
        .zip(&placement.powers)
        .zip(mean_small_scale.iter().zip(mean_shadow))
        .map(|((c, p), (g, s))| p * s * g * scenario.path_loss(x.distance(c)))
        .sum();
    sum / scenario.noise_power
}
