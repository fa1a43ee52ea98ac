//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth integrands
//! and a fixed composite Gauss–Legendre rule for grid-based expectations.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) on `[a, b]`.
///
/// Subdivides until each panel's error estimate is below its length-weighted
/// share of `max(abs_tol, rel_tol * |I|)` or the panel budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            abs_error: 0.0,
        };
    }
    const MAX_PANELS: usize = 20_000;
    let (value, err) = kronrod15(&f, a, b);
    let mut panels = vec![(a, b, value, err)];
    let mut total = value;
    let mut total_err = err;
    while total_err > abs_tol.max(rel_tol * total.abs()) && panels.len() < MAX_PANELS {
        // Split the panel with the largest error estimate.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, v, e) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    // Re-sum to shed the drift of the incremental updates.
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    Integral {
        value: panels.iter().map(|p| p.2).sum(),
        abs_error: panels.iter().map(|p| p.3).sum(),
    }
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Nodes and positive weights of a composite 5-point Gauss–Legendre rule with
/// `panels` equal panels on `[a, b]`. Weights sum to `b - a`.
pub fn gauss_legendre_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(5 * panels);
    for p in 0..panels {
        let center = a + (p as f64 + 0.5) * width;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            nodes.push((center + 0.5 * width * x, 0.5 * width * w));
        }
    }
    nodes
}
