//! Sample a two-community SBM, inspect it and write it out.
//!
//! cargo run --example sample_network

use social_learning::sbm::{perron_vector, sample_sbm, write_network, SbmParams, PERRON_MAX_ITER, PERRON_TOL};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let net = sample_sbm(&params, 7, true, 100)?;
    println!("{} agents, accepted after {} draw(s)", net.size(), net.draws);

    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        println!("edge density {a} -> {b}: {:.3}", net.block_density(a, b));
    }

    let u = perron_vector(&net.combination, PERRON_TOL, PERRON_MAX_ITER)?;
    let mass0: f64 = u.iter().take(15).sum();
    println!("Perron mass on cluster 0: {mass0:.3}");

    let mut buf = Vec::new();
    write_network(&net, &mut buf)?;
    let text = String::from_utf8(buf).unwrap();
    println!("network file header: {}", text.lines().next().unwrap());
    Ok(())
}
