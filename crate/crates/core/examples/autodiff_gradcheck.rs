//! Builds a small conv → relu → mean graph, runs backward and compares the
//! gradients with central finite differences.
//!
//! cargo run --example autodiff_gradcheck

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carnet::autodiff::{grad_check, Graph};

fn main() -> carnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut random = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>() - 0.5).collect() };
    let x = random(2 * 6 * 10);
    let w = random(4 * 2 * 9);
    let b = random(4);

    let mut g = Graph::<f64>::new();
    let xv = g.param(&[1, 2, 6, 10], x.clone())?;
    let wv = g.constant(&[4, 2, 3, 3], w.clone())?;
    let bv = g.constant(&[4], b.clone())?;
    let y = g.conv2d(xv, wv, bv, 1)?;
    let r = g.tanh(y);
    let loss = g.mean(r);
    g.backward(loss)?;
    println!("loss {:.6}, graph of {} nodes", g.item(loss), g.len());
    println!(
        "dL/dx[0..4] = {:?}",
        &g.grad(xv).expect("x requires grad")[..4]
    );

    let report = grad_check(
        |g, x| {
            let wv = g.constant(&[4, 2, 3, 3], w.clone())?;
            let bv = g.constant(&[4], b.clone())?;
            let y = g.conv2d(x, wv, bv, 1)?;
            let r = g.tanh(y);
            Ok(g.mean(r))
        },
        &[1, 2, 6, 10],
        &x,
        1e-6,
        64,
        7,
    )?;
    println!(
        "checked {} coordinates, max relative error {:.2e} at index {}",
        report.checked, report.max_rel_error, report.worst_index
    );

    let strided = grad_check(
        |g, x| {
            let wv = g.constant(&[4, 2, 3, 3], w.clone())?;
            let bv = g.constant(&[4], b.clone())?;
            let y = g.conv2d(x, wv, bv, 2)?;
            let p = g.global_avg_pool(y)?;
            let s = g.mul(p, p)?;
            Ok(g.sum(s))
        },
        &[1, 2, 6, 10],
        &x,
        1e-6,
        64,
        8,
    )?;
    println!(
        "stride 2 + pooling: max relative error {:.2e}",
        strided.max_rel_error
    );
    Ok(())
}
