//! Splitting a long sequence into short real filters, and the closed-form
//! factorization of the replication sequence `Σ_k z^{kK}`.

use deepconv::factorize::{factor_replication, factor_sequence, replication_sequence};
use deepconv::seqconv::convolve_all;
use deepconv::FilterSeq;

fn main() -> deepconv::Result<()> {
    let w = FilterSeq::new(vec![0.3, -1.2, 2.0, 0.7, -0.4, 1.1, 0.9, -0.5, 0.25])?;
    for s in [2, 3, 4] {
        let res = factor_sequence(&w, s, None)?;
        let back = convolve_all(&res.filters);
        let err = back.coeffs().iter().zip(w.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("s = {s}: {} filters, reconstruction error {err:.1e}", res.filters.len());
    }

    let (k, n) = (6, 9);
    let target = replication_sequence(k, n)?;
    let res = factor_replication(k, n, 4, None)?;
    println!(
        "replication K = {k}, N = {n}: degree {}, {} filters of length <= 5, residual {:.1e}",
        target.degree(),
        res.filters.len(),
        res.residual
    );
    Ok(())
}
