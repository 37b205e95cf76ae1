//! Optimizer update rules on hand-recursed cases.

use autodiff::{Ctx, Optimizer, ParamStore, Tape, TensorError};

/// Populate the gradient of `p` with `g` via an actual backward pass
/// (loss = sum(g .* p)).
fn populate_grad(store: &mut ParamStore, p: autodiff::ParamId, g: &[f64]) {
    let mut tape = Tape::new();
    let root = {
        let mut ctx = Ctx::new(&mut tape, store);
        let v = ctx.param(p).unwrap();
        let gv = ctx.tape.constant(&[g.len()], g.to_vec()).unwrap();
        let prod = ctx.tape.mul(v, gv).unwrap();
        ctx.tape.sum(prod, None).unwrap()
    };
    tape.backward(root, store).unwrap();
}

#[test]
fn sgd_single_step() {
    let mut store = ParamStore::new();
    let p = store.register("p", &[1], vec![1.0]);
    populate_grad(&mut store, p, &[2.0]);
    let mut opt = Optimizer::sgd(0.1);
    opt.step(&mut store, &[p]).unwrap();
    assert!((store.data(p)[0] - 0.8).abs() < 1e-15);
    // gradients zeroed by the step
    assert!(!store.grad_populated(p));
    assert_eq!(store.grad(p), &[0.0]);
}

#[test]
fn adam_first_step_is_signed_lr() {
    let mut store = ParamStore::new();
    let p = store.register("p", &[1], vec![1.0]);
    populate_grad(&mut store, p, &[5.0]);
    let mut opt = Optimizer::adam(0.01);
    opt.step(&mut store, &[p]).unwrap();
    assert!((store.data(p)[0] - 0.99).abs() < 1e-6, "got {}", store.data(p)[0]);
}

#[test]
fn sgd_momentum_two_step_recursion() {
    // mu=0.9, g=1 twice: v1=1, v2=1.9, p = p0 - lr*(1+1.9)
    let lr = 0.1;
    let mut store = ParamStore::new();
    let p = store.register("p", &[1], vec![1.0]);
    let mut opt = Optimizer::sgd_momentum(lr, 0.9);
    populate_grad(&mut store, p, &[1.0]);
    opt.step(&mut store, &[p]).unwrap();
    populate_grad(&mut store, p, &[1.0]);
    opt.step(&mut store, &[p]).unwrap();
    assert!((store.data(p)[0] - (1.0 - lr * 2.9)).abs() < 1e-12);
    assert_eq!(opt.step_count(), 2);
}

#[test]
fn rmsprop_single_step() {
    // s = 0.01*g^2, update = lr*g/(sqrt(s)+eps)
    let mut store = ParamStore::new();
    let p = store.register("p", &[1], vec![0.0]);
    populate_grad(&mut store, p, &[3.0]);
    let mut opt = Optimizer::rmsprop(0.01);
    opt.step(&mut store, &[p]).unwrap();
    let expected = -0.01 * 3.0 / ((0.01f64 * 9.0).sqrt() + 1e-8);
    assert!((store.data(p)[0] - expected).abs() < 1e-12);
}

#[test]
fn zero_grad_zero_state_leaves_sgd_variants_unchanged() {
    for momentum in [None, Some(0.9)] {
        let mut store = ParamStore::new();
        let p = store.register("p", &[2], vec![1.5, -0.5]);
        populate_grad(&mut store, p, &[0.0, 0.0]);
        let mut opt = match momentum {
            None => Optimizer::sgd(0.1),
            Some(m) => Optimizer::sgd_momentum(0.1, m),
        };
        opt.step(&mut store, &[p]).unwrap();
        assert_eq!(store.data(p), &[1.5, -0.5]);
    }
}

#[test]
fn missing_grad_names_parameter() {
    let mut store = ParamStore::new();
    let p = store.register("encoder.weight", &[1], vec![1.0]);
    let mut opt = Optimizer::sgd(0.1);
    let err = opt.step(&mut store, &[p]).unwrap_err();
    match err {
        TensorError::Contract(msg) => assert!(msg.contains("encoder.weight"), "msg: {}", msg),
        other => panic!("expected contract error, got {other:?}"),
    }
}
