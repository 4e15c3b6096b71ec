//! Storage-rate-distortion evaluation: curves, Bjontegaard deltas on any
//! cost axis, iso points, accumulated rates and the MAD ratio.

use std::fmt;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{csv_err, LogRow};

/// Default qp set of a curve.
pub const DEFAULT_QPS: [u8; 5] = [22, 27, 32, 37, 42];
/// Storage weights reported in weighted BD tables, heaviest first.
pub const DEFAULT_LAMBDAS: [f64; 3] = [0.1, 0.01, 1e-3];

fn eval_err(msg: impl Into<String>) -> Error {
    Error::Eval(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrdPoint {
    pub qp: u8,
    #[serde(rename = "S_bytes")]
    pub s_bytes: f64,
    /// Mean bytes per request.
    #[serde(rename = "R_bytes")]
    pub r_bytes: f64,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrdCurve {
    pub method: String,
    /// Ascending qp.
    pub points: Vec<SrdPoint>,
}

impl SrdCurve {
    /// Sorts by qp and checks the curve shape.
    pub fn new(method: impl Into<String>, mut points: Vec<SrdPoint>) -> Result<Self> {
        points.sort_by_key(|p| p.qp);
        let c = Self { method: method.into(), points };
        c.validate()?;
        Ok(c)
    }

    /// At least four points, finite values, S and D strictly decreasing
    /// with qp.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(eval_err(format!("{}: {} points, need 4", self.method, self.points.len())));
        }
        for p in &self.points {
            if !(p.s_bytes.is_finite() && p.r_bytes.is_finite() && p.psnr_db.is_finite()) {
                return Err(eval_err(format!("{}: non-finite value at qp {}", self.method, p.qp)));
            }
        }
        for w in self.points.windows(2) {
            if w[0].qp >= w[1].qp {
                return Err(eval_err(format!("{}: repeated qp {}", self.method, w[1].qp)));
            }
            if w[1].s_bytes >= w[0].s_bytes || w[1].psnr_db >= w[0].psnr_db {
                return Err(eval_err(format!(
                    "{}: S and D must fall from qp {} to qp {}",
                    self.method, w[0].qp, w[1].qp
                )));
            }
        }
        Ok(())
    }
}

/// Cost projected against distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostAxis {
    R,
    S,
    /// R + lambda S.
    Weighted(f64),
    /// alpha R + beta S.
    Linear {
        alpha: f64,
        beta: f64,
    },
}

impl CostAxis {
    pub fn cost(&self, p: &SrdPoint) -> f64 {
        match *self {
            CostAxis::R => p.r_bytes,
            CostAxis::S => p.s_bytes,
            CostAxis::Weighted(l) => p.r_bytes + l * p.s_bytes,
            CostAxis::Linear { alpha, beta } => alpha * p.r_bytes + beta * p.s_bytes,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            CostAxis::Weighted(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for CostAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostAxis::R => f.write_str("R"),
            CostAxis::S => f.write_str("S"),
            CostAxis::Weighted(_) => f.write_str("R+lambdaS"),
            CostAxis::Linear { alpha, beta } => write!(f, "{alpha}R+{beta}S"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BdResult {
    /// Average cost difference of test against ref at equal distortion.
    pub delta_pct: f64,
    pub axis: CostAxis,
    /// Distortion interval both curves cover.
    pub overlap: (f64, f64),
}

/// Least-squares cubic of `y` against `x`, in a centred and scaled variable
/// for conditioning. Returns (coefficients low to high, centre, scale).
fn cubic_fit(x: &[f64], y: &[f64]) -> Result<([f64; 4], f64, f64)> {
    let m = x.len() as f64;
    let mu = x.iter().sum::<f64>() / m;
    let sd = (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m).sqrt();
    if sd == 0.0 {
        return Err(eval_err("all distortions equal"));
    }
    let a = DMatrix::from_fn(x.len(), 4, |i, j| ((x[i] - mu) / sd).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-12).map_err(eval_err)?;
    Ok(([sol[0], sol[1], sol[2], sol[3]], mu, sd))
}

/// Integral of the fitted cubic over x in [lo, hi].
fn integrate(fit: &([f64; 4], f64, f64), lo: f64, hi: f64) -> f64 {
    let (c, mu, sd) = fit;
    let prim = |x: f64| {
        let t = (x - mu) / sd;
        c[0] * t + c[1] * t * t / 2.0 + c[2] * t.powi(3) / 3.0 + c[3] * t.powi(4) / 4.0
    };
    sd * (prim(hi) - prim(lo))
}

fn log_cost(curve: &SrdCurve, axis: CostAxis) -> Result<(Vec<f64>, Vec<f64>)> {
    curve.validate()?;
    let mut d = Vec::new();
    let mut y = Vec::new();
    for p in &curve.points {
        let c = axis.cost(p);
        if !(c > 0.0) {
            return Err(eval_err(format!("{}: cost {c} at qp {} on axis {axis}", curve.method, p.qp)));
        }
        d.push(p.psnr_db);
        y.push(c.log10());
    }
    Ok((d, y))
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Bjontegaard delta of `test` against `reference` on `axis`: cubic fits of
/// log10 cost against distortion, averaged over the common distortion
/// range; the result is the mean cost ratio minus one, in percent.
pub fn bd_delta(reference: &SrdCurve, test: &SrdCurve, axis: CostAxis) -> Result<BdResult> {
    if let CostAxis::Weighted(l) = axis {
        if !(l >= 0.0) {
            return Err(eval_err(format!("lambda {l} must be non-negative")));
        }
    }
    let (dr, yr) = log_cost(reference, axis)?;
    let (dt, yt) = log_cost(test, axis)?;
    let (rlo, rhi) = range(&dr);
    let (tlo, thi) = range(&dt);
    let lo = rlo.max(tlo);
    let hi = rhi.min(thi);
    if hi <= lo {
        return Err(eval_err(format!("no distortion overlap between {} and {}", reference.method, test.method)));
    }
    let fr = cubic_fit(&dr, &yr)?;
    let ft = cubic_fit(&dt, &yt)?;
    let mean_diff = (integrate(&ft, lo, hi) - integrate(&fr, lo, hi)) / (hi - lo);
    Ok(BdResult { delta_pct: (10f64.powf(mean_diff) - 1.0) * 100.0, axis, overlap: (lo, hi) })
}

/// The (D, R + lambda S) projection of a curve.
pub fn weighted_cost_curve(curve: &SrdCurve, lambda: f64) -> Vec<(f64, f64)> {
    curve.points.iter().map(|p| (p.psnr_db, CostAxis::Weighted(lambda).cost(p))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsoAxis {
    D,
    S,
    R,
}

impl fmt::Display for IsoAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IsoAxis::D => "D",
            IsoAxis::S => "S",
            IsoAxis::R => "R",
        })
    }
}

/// The point of the curve's polyline where `axis` equals `value`, by linear
/// interpolation between consecutive qps; the first crossing wins.
pub fn iso_point(curve: &SrdCurve, axis: IsoAxis, value: f64) -> Result<SrdPoint> {
    let get = |p: &SrdPoint| match axis {
        IsoAxis::D => p.psnr_db,
        IsoAxis::S => p.s_bytes,
        IsoAxis::R => p.r_bytes,
    };
    let pts = &curve.points;
    if let Some(p) = pts.iter().find(|p| get(p) == value) {
        return Ok(*p);
    }
    for w in pts.windows(2) {
        let (a, b) = (get(&w[0]), get(&w[1]));
        if (a < value && value < b) || (b < value && value < a) {
            let t = (value - a) / (b - a);
            let lerp = |x: f64, y: f64| x + t * (y - x);
            let mut p = SrdPoint {
                qp: w[0].qp,
                s_bytes: lerp(w[0].s_bytes, w[1].s_bytes),
                r_bytes: lerp(w[0].r_bytes, w[1].r_bytes),
                psnr_db: lerp(w[0].psnr_db, w[1].psnr_db),
            };
            // the interpolated coordinate is the requested value exactly
            match axis {
                IsoAxis::D => p.psnr_db = value,
                IsoAxis::S => p.s_bytes = value,
                IsoAxis::R => p.r_bytes = value,
            }
            return Ok(p);
        }
    }
    Err(eval_err(format!("{axis} = {value} outside the range of {}", curve.method)))
}

/// Running sum of per-request bits.
pub fn accumulated_rate(bits: &[usize]) -> Vec<u64> {
    bits.iter()
        .scan(0u64, |acc, &b| {
            *acc += b as u64;
            Some(*acc)
        })
        .collect()
}

/// Accumulated series of one user of a simulation log, in request order.
pub fn accumulated_rate_of(rows: &[LogRow], user: &str) -> Vec<u64> {
    let mut mine: Vec<&LogRow> = rows.iter().filter(|r| r.user == user).collect();
    mine.sort_by_key(|r| r.request_idx);
    accumulated_rate(&mine.iter().map(|r| r.bits).collect::<Vec<_>>())
}

/// max |r_i - mean| / mean.
pub fn mad_ratio(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(eval_err("no rates"));
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    if !(mean > 0.0) {
        return Err(eval_err(format!("mean rate {mean} is not positive")));
    }
    Ok(rates.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max) / mean)
}

pub fn mean_usefulness(rows: &[LogRow]) -> Option<f64> {
    (!rows.is_empty()).then(|| rows.iter().map(|r| r.usefulness).sum::<f64>() / rows.len() as f64)
}

/// One curve point from a simulation log: R is the mean over every
/// (user, request) pair, D the PSNR of the mean viewport MSE.
pub fn curve_point(qp: u8, storage_bits: usize, rows: &[LogRow]) -> Result<SrdPoint> {
    if rows.is_empty() {
        return Err(eval_err("empty log"));
    }
    let mut mse = 0.0;
    for r in rows {
        mse += r.mse.ok_or_else(|| eval_err("log rows without distortion"))?;
    }
    mse /= rows.len() as f64;
    let r = rows.iter().map(|r| r.bits as f64).sum::<f64>() / rows.len() as f64 / 8.0;
    Ok(SrdPoint { qp, s_bytes: storage_bits as f64 / 8.0, r_bytes: r, psnr_db: crate::geom::psnr_from_mse(mse) })
}

/// Writes `method,qp,S_bytes,R_bytes,psnr_db`.
pub fn write_curves<W: Write>(curves: &[SrdCurve], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "qp", "S_bytes", "R_bytes", "psnr_db"]).map_err(csv_err)?;
    for c in curves {
        for p in &c.points {
            wtr.write_record([
                c.method.clone(),
                p.qp.to_string(),
                p.s_bytes.to_string(),
                p.r_bytes.to_string(),
                p.psnr_db.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads curves written by [`write_curves`], methods in first-appearance
/// order.
pub fn read_curves<R: Read>(r: R) -> Result<Vec<SrdCurve>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut grouped: Vec<(String, Vec<SrdPoint>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| eval_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (method, qp, s, rr, d): (String, u8, f64, f64, f64) =
            rec.deserialize(None).map_err(|e| eval_err(format!("line {line}: {e}")))?;
        let p = SrdPoint { qp, s_bytes: s, r_bytes: rr, psnr_db: d };
        match grouped.iter_mut().find(|(m, _)| *m == method) {
            Some((_, v)) => v.push(p),
            None => grouped.push((method, vec![p])),
        }
    }
    grouped.into_iter().map(|(m, v)| SrdCurve::new(m, v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BdRow {
    pub reference: String,
    pub test: String,
    pub result: BdResult,
}

/// BD-R, BD-S, then weighted BD for each lambda, for every test method
/// against `reference`.
pub fn bd_table(reference: &SrdCurve, tests: &[SrdCurve], lambdas: &[f64]) -> Result<Vec<BdRow>> {
    let mut axes = vec![CostAxis::R, CostAxis::S];
    axes.extend(lambdas.iter().map(|&l| CostAxis::Weighted(l)));
    let mut rows = Vec::new();
    for t in tests {
        for &axis in &axes {
            rows.push(BdRow {
                reference: reference.method.clone(),
                test: t.method.clone(),
                result: bd_delta(reference, t, axis)?,
            });
        }
    }
    Ok(rows)
}

/// Writes `ref,test,axis,lambda,delta_pct`; lambda is empty off the
/// weighted axis.
pub fn write_bd<W: Write>(rows: &[BdRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["ref", "test", "axis", "lambda", "delta_pct"]).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.reference.clone(),
            r.test.clone(),
            r.result.axis.to_string(),
            r.result.axis.lambda().map(|l| l.to_string()).unwrap_or_default(),
            format!("{:.4}", r.result.delta_pct),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `method,axis,value,S_bytes,R_bytes,psnr_db` for each curve at each
/// value it covers.
pub fn write_iso<W: Write>(curves: &[SrdCurve], axis: IsoAxis, values: &[f64], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "axis", "value", "S_bytes", "R_bytes", "psnr_db"]).map_err(csv_err)?;
    for c in curves {
        for &v in values {
            if let Ok(p) = iso_point(c, axis, v) {
                wtr.write_record([
                    c.method.clone(),
                    axis.to_string(),
                    v.to_string(),
                    p.s_bytes.to_string(),
                    p.r_bytes.to_string(),
                    p.psnr_db.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn curve(name: &str, f: impl Fn(f64) -> (f64, f64), ds: &[f64]) -> SrdCurve {
        let pts = ds
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let (s, r) = f(d);
                SrdPoint { qp: 22 + 5 * i as u8, s_bytes: s, r_bytes: r, psnr_db: d }
            })
            .collect();
        SrdCurve::new(name, pts).unwrap()
    }

    fn base() -> SrdCurve {
        curve("a", |d| (10f64.powf(3.0 + 0.05 * d), 10f64.powf(1.0 + 0.06 * d)), &[42.0, 39.0, 36.0, 33.0, 30.0])
    }

    #[test]
    fn bd_examples() {
        let a = base();
        assert_eq!(bd_delta(&a, &a, CostAxis::R).unwrap().delta_pct, 0.0);
        let mut b = a.clone();
        for p in &mut b.points {
            p.r_bytes *= 2.0;
        }
        assert!((bd_delta(&a, &b, CostAxis::R).unwrap().delta_pct - 100.0).abs() < 1e-9);
        assert!(bd_delta(&a, &b, CostAxis::S).unwrap().delta_pct.abs() < 1e-9);
        let w0 = bd_delta(&a, &b, CostAxis::Weighted(0.0)).unwrap().delta_pct;
        assert!((w0 - 100.0).abs() < 1e-9 * 100.0);
        let lin = bd_delta(&a, &b, CostAxis::Linear { alpha: 1.0, beta: 0.0 }).unwrap().delta_pct;
        assert!((lin - w0).abs() < 1e-9);
    }

    #[test]
    fn bd_errors() {
        let a = base();
        let mut short = a.clone();
        short.points.truncate(3);
        assert!(bd_delta(&a, &short, CostAxis::R).is_err());
        let far = curve("far", |d| (1e6 + d, 1e4 + d), &[80.0, 78.0, 76.0, 74.0]);
        assert!(bd_delta(&a, &far, CostAxis::R).is_err());
        assert!(bd_delta(&a, &a, CostAxis::Weighted(-1.0)).is_err());
        assert!(SrdCurve::new("bad", vec![a.points[0], a.points[0], a.points[1], a.points[2]]).is_err());
    }

    /// Dense trapezoid integration of the generating functions.
    fn oracle(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * (g(x) - f(x));
        }
        (10f64.powf(s * h / (hi - lo)) - 1.0) * 100.0
    }

    #[test]
    fn bd_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (a0, a1, a2) = (rng.gen_range(4.0..6.0), rng.gen_range(0.03..0.09), rng.gen_range(0.0..4e-4));
            let (b0, b1, b2) = (rng.gen_range(4.0..6.0), rng.gen_range(0.03..0.09), rng.gen_range(0.0..4e-4));
            let f = move |d: f64| a0 + a1 * (d - 25.0) + a2 * (d - 25.0).powi(2) + 0.01 * (-(d - 25.0) / 9.0).exp();
            let g = move |d: f64| b0 + b1 * (d - 25.0) + b2 * (d - 25.0).powi(2) + 0.01 * (-(d - 25.0) / 7.0).exp();
            let da: Vec<f64> = (0..5).map(|i| 44.0 - 3.0 * i as f64 - rng.gen_range(0.0..1.0)).collect();
            let db: Vec<f64> = (0..5).map(|i| 43.0 - 3.2 * i as f64 - rng.gen_range(0.0..1.0)).collect();
            let ca = curve("a", |d| (1e7 + d, 10f64.powf(f(d))), &da);
            let cb = curve("b", |d| (1e7 + d, 10f64.powf(g(d))), &db);
            let r = bd_delta(&ca, &cb, CostAxis::R).unwrap();
            let want = oracle(&f, &g, r.overlap.0, r.overlap.1);
            assert!((r.delta_pct - want).abs() < 0.1, "{} vs {want}", r.delta_pct);
        }
    }

    #[test]
    fn large_lambda_ranks_by_storage() {
        let a = base();
        let b =
            curve("b", |d| (10f64.powf(2.9 + 0.05 * d), 10f64.powf(1.3 + 0.06 * d)), &[42.0, 39.0, 36.0, 33.0, 30.0]);
        assert!(bd_delta(&a, &b, CostAxis::R).unwrap().delta_pct > 0.0);
        assert!(bd_delta(&a, &b, CostAxis::S).unwrap().delta_pct < 0.0);
        assert!(bd_delta(&a, &b, CostAxis::Weighted(1e6)).unwrap().delta_pct < 0.0);
        let w = weighted_cost_curve(&a, 0.0);
        assert!(w.iter().zip(&a.points).all(|(&(d, c), p)| d == p.psnr_db && c == p.r_bytes));
    }

    #[test]
    fn iso_examples() {
        let a = base();
        for p in &a.points {
            assert_eq!(iso_point(&a, IsoAxis::D, p.psnr_db).unwrap(), *p);
            assert_eq!(iso_point(&a, IsoAxis::S, p.s_bytes).unwrap(), *p);
        }
        let (p, q) = (a.points[1], a.points[2]);
        let m = iso_point(&a, IsoAxis::D, (p.psnr_db + q.psnr_db) / 2.0).unwrap();
        assert!((m.s_bytes - (p.s_bytes + q.s_bytes) / 2.0).abs() <= 1e-12 * m.s_bytes);
        assert!((m.r_bytes - (p.r_bytes + q.r_bytes) / 2.0).abs() <= 1e-12 * m.r_bytes);
        assert!(iso_point(&a, IsoAxis::D, 50.0).is_err());
    }

    #[test]
    fn mad_and_accumulation() {
        assert_eq!(mad_ratio(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!((mad_ratio(&[90.0, 100.0, 110.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!(mad_ratio(&[]).is_err());
        assert_eq!(accumulated_rate(&[7]), vec![7]);
        assert_eq!(accumulated_rate(&[7, 0, 0, 3]), vec![7, 7, 7, 10]);
    }

    #[test]
    fn csv_round_trip() {
        let a = base();
        let mut b = base();
        b.method = "b".into();
        let mut buf = Vec::new();
        write_curves(&[a.clone(), b.clone()], &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("method,qp,S_bytes,R_bytes,psnr_db\n"));
        assert_eq!(read_curves(buf.as_slice()).unwrap(), vec![a.clone(), b.clone()]);
        let rows = bd_table(&a, &[b], &DEFAULT_LAMBDAS).unwrap();
        let mut out = Vec::new();
        write_bd(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ref,test,axis,lambda,delta_pct");
        assert_eq!(lines[1], "a,b,R,,0.0000");
        assert_eq!(lines[3], "a,b,R+lambdaS,0.1,0.0000");
        assert_eq!(lines[5], "a,b,R+lambdaS,0.001,0.0000");
    }

    fn arb_curve() -> impl Strategy<Value = SrdCurve> {
        (3.0f64..6.0, 0.02f64..0.1, 0.0f64..3e-4, 25.0f64..35.0, 2.0f64..4.0).prop_map(|(a, b, c, d0, step)| {
            let ds: Vec<f64> = (0..5).map(|i| d0 + step * (4 - i) as f64).collect();
            curve("p", |d| (10f64.powf(a + 2.0 + b * d), 10f64.powf(a + b * d + c * (d - d0).powi(2))), &ds)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bd_properties(a in arb_curve(), b in arb_curve(), k in 0.1f64..10.0) {
            let ab = bd_delta(&a, &b, CostAxis::R);
            prop_assume!(ab.is_ok());
            let ab = ab.unwrap().delta_pct / 100.0;
            prop_assert_eq!(bd_delta(&a, &a, CostAxis::R).unwrap().delta_pct, 0.0);
            // same curves rescaled by one factor
            let scale = |c: &SrdCurve| {
                let mut c = c.clone();
                for p in &mut c.points { p.r_bytes *= k; }
                c
            };
            let scaled = bd_delta(&scale(&a), &scale(&b), CostAxis::R).unwrap().delta_pct / 100.0;
            prop_assert!((scaled - ab).abs() < 1e-9 * (1.0 + ab.abs()));
            // B against A is the inverse ratio on the shared interval
            let ba = bd_delta(&b, &a, CostAxis::R).unwrap().delta_pct / 100.0;
            prop_assert!(((1.0 + ab) * (1.0 + ba) - 1.0).abs() < 1e-9);
            let w0 = bd_delta(&a, &b, CostAxis::Weighted(0.0)).unwrap().delta_pct / 100.0;
            prop_assert!((w0 - ab).abs() <= 1e-9 * ab.abs().max(1e-12));
        }

        #[test]
        fn iso_points_lie_on_the_polyline(c in arb_curve(), t in 0.0f64..1.0) {
            let (lo, hi) = range(&c.points.iter().map(|p| p.psnr_db).collect::<Vec<_>>());
            let d = lo + t * (hi - lo);
            let p = iso_point(&c, IsoAxis::D, d).unwrap();
            let i = c.points.windows(2).position(|w| w[1].psnr_db <= d && d <= w[0].psnr_db).unwrap();
            let (u, v) = (c.points[i], c.points[i + 1]);
            prop_assert!(p.s_bytes <= u.s_bytes.max(v.s_bytes) * (1.0 + 1e-12));
            prop_assert!(p.s_bytes >= u.s_bytes.min(v.s_bytes) * (1.0 - 1e-12));
            prop_assert!(p.r_bytes <= u.r_bytes.max(v.r_bytes) * (1.0 + 1e-12));
            prop_assert!(p.r_bytes >= u.r_bytes.min(v.r_bytes) * (1.0 - 1e-12));
        }
    }
}
