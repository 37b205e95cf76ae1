//! Every primitive's analytic gradient against central finite differences,
//! over randomized shapes and seeds.

use autodiff::{gradient_check, uniform, Ctx, ParamStore, Result, TensorError, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-5;

/// Random value bounded away from zero, for kinked or singular ops.
fn away_from_zero(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..hi);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

fn check<F>(store: &mut ParamStore, builder: F) -> f64
where
    F: FnMut(&mut Ctx) -> Result<Value>,
{
    let ids: Vec<_> = store.ids().collect();
    gradient_check(store, &ids, builder, EPS).unwrap()
}

#[test]
fn quadratic_is_nearly_exact() {
    let mut store = ParamStore::new();
    let x = store.register("x", &[3], vec![1.0, 2.0, 3.0]);
    let err = check(&mut store, |ctx| {
        let v = ctx.param(x)?;
        let sq = ctx.tape.mul(v, v)?;
        ctx.tape.sum(sq, None)
    });
    assert!(err < 1e-8, "relative error {}", err);
}

#[test]
fn elementwise_binary_ops() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..4usize);
        let c = rng.random_range(1..5usize);
        let mut store = ParamStore::new();
        let a = store.register("a", &[r, c], uniform(r * c, -2.0, 2.0, &mut rng));
        // denominators bounded away from zero so div stays smooth
        let bdata: Vec<f64> = (0..r * c).map(|_| away_from_zero(&mut rng, 0.6, 2.0)).collect();
        let b = store.register("b", &[r, c], bdata);
        let which = seed % 4;
        let err = check(&mut store, |ctx| {
            let va = ctx.param(a)?;
            let vb = ctx.param(b)?;
            let out = match which {
                0 => ctx.tape.add(va, vb)?,
                1 => ctx.tape.sub(va, vb)?,
                2 => ctx.tape.mul(va, vb)?,
                _ => ctx.tape.div(va, vb)?,
            };
            let sq = ctx.tape.mul(out, out)?;
            ctx.tape.sum(sq, None)
        });
        assert!(err < TOL, "seed {} op {} err {}", seed, which, err);
    }
}

#[test]
fn matmul_and_transpose() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (m, k, n) = (
            rng.random_range(1..4usize),
            rng.random_range(1..4usize),
            rng.random_range(1..4usize),
        );
        let mut store = ParamStore::new();
        let a = store.register("a", &[m, k], uniform(m * k, -1.0, 1.0, &mut rng));
        let b = store.register("b", &[k, n], uniform(k * n, -1.0, 1.0, &mut rng));
        let err = check(&mut store, |ctx| {
            let va = ctx.param(a)?;
            let vb = ctx.param(b)?;
            let prod = ctx.tape.matmul(va, vb)?;
            let tr = ctx.tape.transpose(prod)?;
            let sq = ctx.tape.mul(tr, tr)?;
            ctx.tape.sum(sq, None)
        });
        assert!(err < TOL, "seed {} err {}", seed, err);
    }
}

#[test]
fn unary_ops() {
    // (op index, input range shifted to its domain)
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let n = rng.random_range(1..6usize);
        let which = seed % 7;
        let data: Vec<f64> = (0..n)
            .map(|_| match which {
                4 => rng.random_range(0.2..2.0),          // log
                5 => rng.random_range(0.2..2.0),          // sqrt
                2 => away_from_zero(&mut rng, 0.05, 2.0), // relu away from kink
                _ => rng.random_range(-2.0..2.0),
            })
            .collect();
        let mut store = ParamStore::new();
        let x = store.register("x", &[1, n], data);
        let err = check(&mut store, |ctx| {
            let v = ctx.param(x)?;
            let out = match which {
                0 => ctx.tape.sigmoid(v),
                1 => ctx.tape.tanh(v),
                2 => ctx.tape.relu(v),
                3 => ctx.tape.exp(v),
                4 => ctx.tape.log(v),
                5 => ctx.tape.sqrt(v),
                _ => ctx.tape.cos(v),
            };
            let sq = ctx.tape.mul(out, out)?;
            ctx.tape.sum(sq, None)
        });
        assert!(err < TOL, "seed {} op {} err {}", seed, which, err);
    }
}

#[test]
fn softmax_both_axes() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let r = rng.random_range(1..4usize);
        let c = rng.random_range(1..5usize);
        let axis = (seed % 2) as usize;
        let mut store = ParamStore::new();
        let x = store.register("x", &[r, c], uniform(r * c, -2.0, 2.0, &mut rng));
        let w = store.register("w", &[r, c], uniform(r * c, -1.0, 1.0, &mut rng));
        let err = check(&mut store, |ctx| {
            let v = ctx.param(x)?;
            let vw = ctx.param(w)?;
            let s = ctx.tape.softmax(v, axis)?;
            let weighted = ctx.tape.mul(s, vw)?;
            ctx.tape.sum(weighted, None)
        });
        assert!(err < TOL, "seed {} err {}", seed, err);
    }
}

#[test]
fn reductions_selections_and_concat() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let r = rng.random_range(2..5usize);
        let c = rng.random_range(1..4usize);
        let mut store = ParamStore::new();
        let x = store.register("x", &[r, c], uniform(r * c, -1.5, 1.5, &mut rng));
        let y = store.register("y", &[r, c], uniform(r * c, -1.5, 1.5, &mut rng));
        let rows: Vec<usize> = (0..r + 1).map(|_| rng.random_range(0..r)).collect();
        let scatter_to: Vec<usize> = (0..r + 1).map(|_| rng.random_range(0..3)).collect();
        let axis = seed % 3;
        let err = check(&mut store, |ctx| {
            let vx = ctx.param(x)?;
            let vy = ctx.param(y)?;
            let cat = ctx.tape.concat(0, &[vx, vy])?;
            let sel = ctx.tape.index_select(cat, &rows)?;
            let scat = ctx.tape.scatter_add(sel, &scatter_to, 3)?;
            let sl = ctx.tape.slice(scat, 0, 0, 2)?;
            let red = match axis {
                0 => ctx.tape.sum(sl, Some(0))?,
                1 => ctx.tape.mean(sl, Some(1))?,
                _ => ctx.tape.sum(sl, None)?,
            };
            let sq = ctx.tape.mul(red, red)?;
            ctx.tape.sum(sq, None)
        });
        assert!(err < TOL, "seed {} err {}", seed, err);
    }
}

#[test]
fn bias_broadcast_and_dropout() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let r = rng.random_range(1..4usize);
        let c = rng.random_range(1..4usize);
        let mut store = ParamStore::new();
        let x = store.register("x", &[r, c], uniform(r * c, -1.0, 1.0, &mut rng));
        let b = store.register("b", &[c], uniform(c, -1.0, 1.0, &mut rng));
        // Dropout mask must be identical across gradient_check re-evaluations,
        // so the builder reseeds its own RNG on every call.
        let err = check(&mut store, |ctx| {
            let vx = ctx.param(x)?;
            let vb = ctx.param(b)?;
            let z = ctx.tape.broadcast_add_bias(vx, vb)?;
            let mut drop_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD509);
            let d = ctx.tape.dropout(z, 0.3, &mut drop_rng)?;
            let sq = ctx.tape.mul(d, d)?;
            ctx.tape.sum(sq, None)
        });
        assert!(err < TOL, "seed {} err {}", seed, err);
    }
}

#[test]
fn non_finite_loss_is_numeric_error() {
    let mut store = ParamStore::new();
    let x = store.register("x", &[1], vec![-1.0]);
    let ids = [x];
    let res = gradient_check(
        &mut store,
        &ids,
        |ctx| {
            let v = ctx.param(x)?;
            let l = ctx.tape.log(v); // log of a negative number -> NaN
            ctx.tape.sum(l, None)
        },
        EPS,
    );
    assert!(matches!(res, Err(TensorError::Numeric(_))));
}
