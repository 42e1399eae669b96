//! Market inputs, the space-time grid over `[s_b, s_a] x [0, 2 tau]`, boundary
//! data extrapolated from three days of history, and the target function `F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trading day in years (255 trading days per year).
pub const TAU: f64 = 1.0 / 255.0;

/// Default floor applied to extrapolated option prices.
pub const DEFAULT_PRICE_FLOOR: f64 = 0.01;

/// Default number of grid points per dimension.
pub const DEFAULT_GRID_SIZE: usize = 21;

/// End-of-day quotes for a single option on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketDay {
    pub option_bid: f64,
    pub option_ask: f64,
    pub volatility: f64,
    pub stock_bid: Option<f64>,
    pub stock_ask: Option<f64>,
}

impl MarketDay {
    pub fn option_mid(&self) -> f64 {
        0.5 * (self.option_bid + self.option_ask)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let finite = [self.option_bid, self.option_ask, self.volatility]
            .iter()
            .chain(self.stock_bid.iter())
            .chain(self.stock_ask.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite quote".into());
        }
        if !(self.option_bid > 0.0 && self.option_ask > 0.0) {
            return Err(format!(
                "option quotes must be positive (bid {}, ask {})",
                self.option_bid, self.option_ask
            ));
        }
        if self.option_bid > self.option_ask {
            return Err(format!(
                "option bid {} exceeds ask {}",
                self.option_bid, self.option_ask
            ));
        }
        if self.volatility <= 0.0 {
            return Err(format!(
                "volatility must be positive, got {}",
                self.volatility
            ));
        }
        if let (Some(b), Some(a)) = (self.stock_bid, self.stock_ask) {
            if !(b > 0.0 && a > 0.0) || b > a {
                return Err(format!("invalid stock quotes (bid {b}, ask {a})"));
            }
        } else if self.stock_bid.is_some() || self.stock_ask.is_some() {
            return Err("stock bid and ask must be given together".into());
        }
        Ok(())
    }
}

/// Three consecutive days of quotes (t = -2 tau, -tau, 0) for one option, plus
/// the realized option prices on the next two days when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBlock {
    pub option_id: String,
    /// Oldest first: `days[2]` is today.
    pub days: [MarketDay; 3],
    pub real_plus1: Option<f64>,
    pub real_plus2: Option<f64>,
}

impl DataBlock {
    pub fn new(
        option_id: impl Into<String>,
        days: [MarketDay; 3],
        real_plus1: Option<f64>,
        real_plus2: Option<f64>,
    ) -> Result<Self> {
        let block = Self {
            option_id: option_id.into(),
            days,
            real_plus1,
            real_plus2,
        };
        block.validate()?;
        Ok(block)
    }

    pub fn today(&self) -> &MarketDay {
        &self.days[2]
    }

    /// Today's stock bid and ask, which bound the price interval.
    pub fn stock_interval(&self) -> Result<(f64, f64)> {
        match (self.today().stock_bid, self.today().stock_ask) {
            (Some(b), Some(a)) => Ok((b, a)),
            _ => Err(self.invalid("stock bid/ask missing for today")),
        }
    }

    pub fn ground_truth(&self) -> Option<(f64, f64)> {
        self.real_plus1.zip(self.real_plus2)
    }

    /// Checks every block invariant except a degenerate stock interval, which
    /// [`GridSpec::from_block`] reports with its own error.
    pub fn validate(&self) -> Result<()> {
        for (k, day) in self.days.iter().enumerate() {
            day.check()
                .map_err(|r| self.invalid(&format!("day {}: {r}", k as i32 - 2)))?;
        }
        let (b, a) = self.stock_interval()?;
        if b > a {
            return Err(self.invalid(&format!("stock bid {b} exceeds ask {a}")));
        }
        for (name, v) in [("real_p1", self.real_plus1), ("real_p2", self.real_plus2)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(self.invalid(&format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidBlock {
            id: self.option_id.clone(),
            reason: reason.to_string(),
        }
    }
}

/// Uniform grid with `m` points per dimension over `[s_b, s_a] x [0, 2 tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub s_b: f64,
    pub s_a: f64,
    pub tau: f64,
}

/// Grid sizes must be odd so that the forecast rows and column fall on nodes.
pub fn check_grid_size(m: usize) -> Result<()> {
    if m.is_multiple_of(2) {
        return Err(Error::EvenGridSize(m));
    }
    if m < 5 {
        return Err(Error::GridTooSmall(m));
    }
    Ok(())
}

impl GridSpec {
    pub fn new(m: usize, s_b: f64, s_a: f64) -> Result<Self> {
        check_grid_size(m)?;
        if !(s_a > s_b) {
            return Err(Error::DegenerateInterval { bid: s_b, ask: s_a });
        }
        Ok(Self {
            m,
            s_b,
            s_a,
            tau: TAU,
        })
    }

    pub fn from_block(block: &DataBlock, m: usize) -> Result<Self> {
        block.validate()?;
        let (s_b, s_a) = block.stock_interval()?;
        Self::new(m, s_b, s_a)
    }

    pub fn ds(&self) -> f64 {
        (self.s_a - self.s_b) / (self.m - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.tau / (self.m - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_b + i as f64 * self.ds()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Position of `s_i` in `[0, 1]`, exact at both ends.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.m - 1) as f64
    }

    /// Time row holding t = tau.
    pub fn row_tomorrow(&self) -> usize {
        (self.m - 1) / 2
    }

    /// Time row holding t = 2 tau.
    pub fn row_day_after(&self) -> usize {
        self.m - 1
    }

    /// Column holding the midpoint of the price interval.
    pub fn mid_column(&self) -> usize {
        (self.m - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Serialized index of grid point `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.m + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.m, k / self.m)
    }

    /// True on the lower/upper price edges and the initial time row.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        j == 0 || i == 0 || i == self.m - 1
    }
}

/// How the three historical quotes are carried onto the forecast window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Constant,
    #[default]
    Quadratic,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::Config(format!(
                "boundary mode must be `constant` or `quadratic`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Quadratic => "quadratic",
        })
    }
}

/// `c0 + c1 x + c2 x^2` with `x = t / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCurve {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TimeCurve {
    pub fn constant(v: f64) -> Self {
        Self {
            c0: v,
            c1: 0.0,
            c2: 0.0,
        }
    }

    /// The interpolating parabola through `values` at t = -2 tau, -tau, 0.
    pub fn through_history(values: [f64; 3]) -> Self {
        let [v0, v1, v2] = values;
        let h = 0.5 * (v2 - 2.0 * v1 + v0);
        Self {
            c0: v2,
            c1: (v2 - v1) + h,
            c2: h,
        }
    }

    pub fn eval(&self, t: f64, tau: f64) -> f64 {
        let x = t / tau;
        self.c0 + x * (self.c1 + x * self.c2)
    }
}

/// Lateral boundary values, volatility and initial condition on the forecast
/// window. Prices are floored and `u_b <= u_a` holds at every time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub lower: TimeCurve,
    pub upper: TimeCurve,
    pub sigma: TimeCurve,
    pub price_floor: f64,
    pub tau: f64,
}

impl BoundaryData {
    pub fn new(lower: TimeCurve, upper: TimeCurve, sigma: TimeCurve, price_floor: f64) -> Self {
        Self {
            lower,
            upper,
            sigma,
            price_floor,
            tau: TAU,
        }
    }

    /// Boundary data with no floor, for manufactured test problems.
    pub fn unfloored(lower: TimeCurve, upper: TimeCurve, sigma: TimeCurve) -> Self {
        Self::new(lower, upper, sigma, f64::NEG_INFINITY)
    }

    pub fn u_a(&self, t: f64) -> f64 {
        self.upper.eval(t, self.tau).max(self.price_floor)
    }

    pub fn u_b(&self, t: f64) -> f64 {
        self.lower
            .eval(t, self.tau)
            .max(self.price_floor)
            .min(self.u_a(t))
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma.eval(t, self.tau).max(0.0)
    }

    /// Initial condition `f(s) = F(s, 0)`.
    pub fn f(&self, spec: &GridSpec, s: f64) -> Result<f64> {
        eval_f(spec, self, s, 0.0)
    }
}

/// Carries the block's history onto `[0, 2 tau]`.
pub fn extrapolate_boundary(
    block: &DataBlock,
    mode: BoundaryMode,
    price_floor: f64,
) -> Result<BoundaryData> {
    block.validate()?;
    let series = |pick: fn(&MarketDay) -> f64| {
        let v = [
            pick(&block.days[0]),
            pick(&block.days[1]),
            pick(&block.days[2]),
        ];
        match mode {
            BoundaryMode::Constant => TimeCurve::constant(v[2]),
            BoundaryMode::Quadratic => TimeCurve::through_history(v),
        }
    };
    Ok(BoundaryData::new(
        series(|d| d.option_bid),
        series(|d| d.option_ask),
        series(|d| d.volatility),
        price_floor,
    ))
}

/// Linear blend of the boundary prices: `(1 - x) u_b(t) + x u_a(t)`.
fn blend(bd: &BoundaryData, x: f64, t: f64) -> f64 {
    (1.0 - x) * bd.u_b(t) + x * bd.u_a(t)
}

/// `F(s, t)` with `s` measured on the normalized coordinate
/// `x = (s - s_b) / (s_a - s_b)`, so `F(s_b, t) = u_b(t)` and `F(s_a, t) = u_a(t)`.
pub fn eval_f(spec: &GridSpec, bd: &BoundaryData, s: f64, t: f64) -> Result<f64> {
    let width = spec.s_a - spec.s_b;
    let slack_s = 1e-12 * width.max(spec.s_a.abs());
    let slack_t = 1e-12 * spec.tau;
    if !(s >= spec.s_b - slack_s && s <= spec.s_a + slack_s)
        || !(t >= -slack_t && t <= 2.0 * spec.tau + slack_t)
    {
        return Err(Error::OutOfDomain { s, t });
    }
    let x = ((s - spec.s_b) / width).clamp(0.0, 1.0);
    Ok(blend(bd, x, t))
}

/// Serialized solution over the grid, index `k = j * m + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl SolutionGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = (0..spec.len())
            .map(|k| {
                let (i, j) = spec.coords(k);
                f(i, j)
            })
            .collect();
        Self { spec, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    /// Rows of constant time, `j = 0..m`.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.spec.m)
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn from_matrix(spec: GridSpec, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != spec.m || rows.iter().any(|r| r.len() != spec.m) {
            return Err(Error::DimensionMismatch {
                expected: spec.m,
                got: rows.len(),
            });
        }
        Ok(Self {
            spec,
            values: rows.concat(),
        })
    }
}

/// `F` at every grid point.
pub fn tabulate_f(spec: &GridSpec, bd: &BoundaryData) -> SolutionGrid {
    SolutionGrid::from_fn(*spec, |i, j| blend(bd, spec.x(i), spec.t(j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn day(bid: f64, ask: f64, vol: f64) -> MarketDay {
        MarketDay {
            option_bid: bid,
            option_ask: ask,
            volatility: vol,
            stock_bid: None,
            stock_ask: None,
        }
    }

    fn block(bids: [f64; 3], asks: [f64; 3], stock: (f64, f64)) -> DataBlock {
        let mut days = [0, 1, 2].map(|k| day(bids[k], asks[k], 0.3));
        days[2].stock_bid = Some(stock.0);
        days[2].stock_ask = Some(stock.1);
        DataBlock::new("X", days, None, None).unwrap()
    }

    #[test]
    fn grid_spec_spacing() {
        let b = block([2.0; 3], [2.2; 3], (100.0, 100.02));
        let spec = GridSpec::from_block(&b, 21).unwrap();
        assert!((spec.ds() - 0.001).abs() < 1e-12);
        assert_eq!(spec.dt(), (2.0 / 255.0) / 20.0);
        assert_eq!(spec.s_b, 100.0);
        assert_eq!(spec.s_a, 100.02);
    }

    #[test]
    fn grid_spec_rejects_bad_inputs() {
        let b = block([2.0; 3], [2.2; 3], (50.0, 50.0));
        assert!(matches!(
            GridSpec::from_block(&b, 21),
            Err(Error::DegenerateInterval { .. })
        ));
        let b = block([2.0; 3], [2.2; 3], (50.0, 51.0));
        let err = GridSpec::from_block(&b, 20).unwrap_err();
        assert_eq!(err.to_string(), "M must be odd, got 20");
        assert!(matches!(
            GridSpec::new(3, 1.0, 2.0),
            Err(Error::GridTooSmall(3))
        ));
    }

    #[test]
    fn block_validation() {
        let mut days = [day(2.0, 2.2, 0.3); 3];
        assert!(DataBlock::new("a", days, None, None).is_err());
        days[2].stock_bid = Some(10.0);
        days[2].stock_ask = Some(10.1);
        assert!(DataBlock::new("a", days, Some(1.0), Some(1.1)).is_ok());
        assert!(DataBlock::new("a", days, Some(0.0), None).is_err());
        days[0].option_bid = 3.0;
        assert!(DataBlock::new("a", days, None, None).is_err());
        days[0].option_bid = 2.0;
        days[1].volatility = 0.0;
        assert!(DataBlock::new("a", days, None, None).is_err());
    }

    #[test]
    fn constant_extrapolation() {
        let b = block([1.0, 1.5, 2.10], [1.2, 1.7, 2.30], (10.0, 10.1));
        let bd = extrapolate_boundary(&b, BoundaryMode::Constant, DEFAULT_PRICE_FLOOR).unwrap();
        for t in [0.0, 0.3 * TAU, TAU, 2.0 * TAU] {
            assert_eq!(bd.u_b(t), 2.10);
            assert_eq!(bd.u_a(t), 2.30);
            assert_eq!(bd.sigma(t), 0.3);
        }
    }

    #[test]
    fn quadratic_extrapolation_of_linear_data() {
        let b = block([1.0, 2.0, 3.0], [1.5, 2.5, 3.5], (10.0, 10.1));
        let bd = extrapolate_boundary(&b, BoundaryMode::Quadratic, DEFAULT_PRICE_FLOOR).unwrap();
        assert_eq!(bd.u_b(TAU), 4.0);
        assert_eq!(bd.u_b(2.0 * TAU), 5.0);
        assert_eq!(bd.u_a(2.0 * TAU), 5.5);
    }

    #[test]
    fn quadratic_extrapolation_is_floored() {
        let b = block([3.0, 1.5, 0.02], [3.1, 1.6, 0.03], (10.0, 10.1));
        let bd = extrapolate_boundary(&b, BoundaryMode::Quadratic, DEFAULT_PRICE_FLOOR).unwrap();
        // Oracle: 3x3 Vandermonde solve through (-2,3.0), (-1,1.5), (0,0.02)
        // in units of tau gives p(x) = 0.02 - 1.47 x + 0.01 x^2.
        let p = |x: f64| 0.02 - 1.47 * x + 0.01 * x * x;
        assert!(p(1.0) < DEFAULT_PRICE_FLOOR);
        assert_eq!(bd.u_b(0.0), 0.02);
        assert_eq!(bd.u_b(TAU), DEFAULT_PRICE_FLOOR);
        assert_eq!(bd.u_b(2.0 * TAU), DEFAULT_PRICE_FLOOR);
        assert!(bd.u_b(TAU) <= bd.u_a(TAU));
    }

    #[test]
    fn lower_boundary_never_exceeds_upper() {
        // Bid trending up fast, ask flat: extrapolated bid crosses the ask.
        let b = block([1.0, 1.5, 2.0], [2.1, 2.1, 2.1], (10.0, 10.1));
        let bd = extrapolate_boundary(&b, BoundaryMode::Quadratic, DEFAULT_PRICE_FLOOR).unwrap();
        assert_eq!(bd.u_b(2.0 * TAU), bd.u_a(2.0 * TAU));
    }

    #[test]
    fn eval_f_corners_and_midpoint() {
        let spec = GridSpec::new(5, 10.0, 12.0).unwrap();
        let bd = BoundaryData::new(
            TimeCurve::constant(2.0),
            TimeCurve::constant(4.0),
            TimeCurve::constant(0.2),
            DEFAULT_PRICE_FLOOR,
        );
        assert_eq!(eval_f(&spec, &bd, 10.0, TAU).unwrap(), 2.0);
        assert_eq!(eval_f(&spec, &bd, 12.0, TAU).unwrap(), 4.0);
        assert_eq!(eval_f(&spec, &bd, 11.0, 0.0).unwrap(), 3.0);
        assert!(matches!(
            eval_f(&spec, &bd, 12.5, 0.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(eval_f(&spec, &bd, 11.0, 3.0 * TAU).is_err());
        assert!(eval_f(&spec, &bd, 11.0, -TAU).is_err());
    }

    #[test]
    fn tabulate_f_linear_rows() {
        let spec = GridSpec::new(5, 1.0, 2.0).unwrap();
        let bd = BoundaryData::unfloored(
            TimeCurve::constant(0.0),
            TimeCurve::constant(1.0),
            TimeCurve::constant(0.2),
        );
        let g = tabulate_f(&spec, &bd);
        for row in g.rows() {
            assert_eq!(row, &[0.0, 0.25, 0.5, 0.75, 1.0]);
        }
    }

    #[test]
    fn tabulate_f_matches_direct_evaluation() {
        let b = block([1.9, 2.05, 2.1], [2.2, 2.25, 2.4], (99.5, 100.5));
        let bd = extrapolate_boundary(&b, BoundaryMode::Quadratic, DEFAULT_PRICE_FLOOR).unwrap();
        let spec = GridSpec::from_block(&b, 21).unwrap();
        let g = tabulate_f(&spec, &bd);
        for (i, j) in [(0, 0), (7, 13), (20, 20), (10, 10)] {
            let direct = eval_f(&spec, &bd, spec.s(i), spec.t(j)).unwrap();
            assert!((g.get(i, j) - direct).abs() <= 1e-12 * direct.abs());
        }
    }

    #[test]
    fn solution_grid_matrix_round_trip() {
        let spec = GridSpec::new(5, 1.0, 2.0).unwrap();
        let g = SolutionGrid::from_fn(spec, |i, j| (i * 10 + j) as f64);
        let back = SolutionGrid::from_matrix(spec, &g.to_matrix()).unwrap();
        assert_eq!(back, g);
        assert_eq!(g.get(3, 1), 31.0);
        assert_eq!(g.values[spec.index(3, 1)], 31.0);
        assert!(SolutionGrid::new(spec, vec![0.0; 24]).is_err());
    }

    #[test]
    fn parse_boundary_mode() {
        assert_eq!(
            "constant".parse::<BoundaryMode>().unwrap(),
            BoundaryMode::Constant
        );
        assert_eq!(
            "quadratic".parse::<BoundaryMode>().unwrap(),
            BoundaryMode::Quadratic
        );
        assert!("cubic".parse::<BoundaryMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn serialization_is_a_bijection(m in (2usize..20).prop_map(|h| 2 * h + 1)) {
                let spec = GridSpec::new(m, 1.0, 2.0).unwrap();
                let mut seen = vec![false; m * m];
                for j in 0..m {
                    for i in 0..m {
                        let k = spec.index(i, j);
                        prop_assert!(!seen[k]);
                        seen[k] = true;
                        prop_assert_eq!(spec.coords(k), (i, j));
                    }
                }
                prop_assert!(seen.iter().all(|&s| s));
            }

            #[test]
            fn quadratic_fit_reproduces_history(v in prop::array::uniform3(0.05f64..50.0)) {
                let c = TimeCurve::through_history(v);
                for (k, t) in [-2.0 * TAU, -TAU, 0.0].into_iter().enumerate() {
                    prop_assert!((c.eval(t, TAU) - v[k]).abs() <= 1e-12 * v[k].max(1.0) * 8.0);
                }
            }

            #[test]
            fn f_hits_boundary_corners_exactly(
                b in 0.05f64..10.0, spread in 0.0f64..5.0, slope in -3.0f64..3.0,
                s_b in 1.0f64..200.0, w in 0.001f64..10.0,
            ) {
                let spec = GridSpec::new(9, s_b, s_b + w).unwrap();
                let bd = BoundaryData::new(
                    TimeCurve { c0: b, c1: slope, c2: 0.1 },
                    TimeCurve { c0: b + spread, c1: slope, c2: 0.1 },
                    TimeCurve::constant(0.3),
                    DEFAULT_PRICE_FLOOR,
                );
                for t in [0.0, 2.0 * TAU] {
                    prop_assert_eq!(eval_f(&spec, &bd, spec.s_b, t).unwrap(), bd.u_b(t));
                    prop_assert_eq!(eval_f(&spec, &bd, spec.s_a, t).unwrap(), bd.u_a(t));
                }
                let g = tabulate_f(&spec, &bd);
                prop_assert_eq!(g.get(0, 0), bd.u_b(0.0));
                prop_assert_eq!(g.get(8, 0), bd.u_a(0.0));
            }

            #[test]
            fn f_is_monotone_in_s(lo in 0.01f64..5.0, gap in 0.0f64..5.0, t in 0.0f64..(2.0 * TAU)) {
                let spec = GridSpec::new(11, 40.0, 41.0).unwrap();
                let bd = BoundaryData::new(
                    TimeCurve::constant(lo),
                    TimeCurve::constant(lo + gap),
                    TimeCurve::constant(0.3),
                    DEFAULT_PRICE_FLOOR,
                );
                let mut prev = f64::NEG_INFINITY;
                for i in 0..spec.m {
                    let v = eval_f(&spec, &bd, spec.s(i).min(spec.s_a), t).unwrap();
                    prop_assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }
}
