//! Train a shallow teacher, deepen it into an interpolating student, and
//! compare both on held-out data.

use deepconv::harness::{run_pipeline, PipelineConfig};

fn main() -> deepconv::Result<()> {
    let cfg = PipelineConfig { test_n: 500, ..PipelineConfig::new(4, 20, 1.0 / 3.0, 0) };
    let (rep, _, _) = run_pipeline(&cfg)?;
    println!("teacher depth {}, parameters {}", rep.teacher_depth, rep.teacher_params);
    println!("student depth {}, width {}, parameters {}", rep.student_depth, rep.student_final_width, rep.student_params);
    println!("max interpolation residual {:.2e}", rep.max_interpolation_residual);
    println!("test RMSE: teacher {:.4}, student {:.4}", rep.teacher_test_rmse, rep.student_test_rmse);
    println!("test points inside the slab {:.2}%", 100.0 * rep.slab_fraction);
    println!("rate bound at this size {:.3}", rep.bounds.rate_bound);
    Ok(())
}
