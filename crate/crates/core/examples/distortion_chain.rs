//! Builds a distortion chain from JSON, applies it and prints the provenance.

use refsim::distort::Chain;
use refsim::harness::{generate_phantom, PhantomParams};

fn main() -> refsim::Result<()> {
    let json = r#"[
        {"kind": "gamma", "params": {"gamma": 0.4}},
        {"kind": "linear_scale", "params": {"factor": 1.2}},
        {"kind": "gaussian_noise", "params": {"sigma_rel": 0.02}, "seed": 9},
        {"kind": "translate", "params": {"dx": 2, "dy": -1}}
    ]"#;
    let chain = Chain::parse_any(json)?;
    let phantom = generate_phantom(6, &PhantomParams::default())?;
    let out = chain.apply(&phantom.image)?;
    println!("chain: {chain}");
    for step in out.provenance() {
        println!("  {step}");
    }
    let (a, b) = (phantom.image.stats(), out.stats());
    println!("range {:.1}..{:.1} -> {:.1}..{:.1}", a.min, a.max, b.min, b.max);
    // compact form round-trips
    assert_eq!(chain.to_string().parse::<Chain>()?, chain);
    Ok(())
}
