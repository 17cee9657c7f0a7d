//! Convolution of short filters, convolutional matrices and the product identity
//! `T^{w*v} = T^w T^v`.

use deepconv::seqconv::downsample;
use deepconv::FilterSeq;

fn main() -> deepconv::Result<()> {
    let w = FilterSeq::new(vec![1.0, -1.0, 1.0])?;
    let v = FilterSeq::new(vec![1.0, 1.0, 1.0])?;
    let wv = w.convolve(&v);
    println!("w * v = {:?}", wv.coeffs());

    let x = [2.0, -1.0, 0.5, 3.0];
    println!("T^w x = {:?}", w.apply(&x));

    let lhs = wv.materialize(x.len());
    let rhs = w.materialize(x.len() + v.degree()) * v.materialize(x.len());
    println!("T^(w*v) is {}x{}, max |T^(w*v) - T^w T^v| = {:e}", lhs.nrows(), lhs.ncols(), (lhs - rhs).amax());

    println!("every 2nd entry of T^w x: {:?}", downsample(&w.apply(&x), 2)?);
    Ok(())
}
