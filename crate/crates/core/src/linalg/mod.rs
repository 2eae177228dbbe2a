//! Dense linear algebra for the small matrices that appear in the model.

mod eigen;
mod expm;
mod lyapunov;
mod ode;

pub use eigen::{eigenvalues, spectral_abscissa, spectral_radius, Eigenvalue};
pub use expm::expm;
pub use lyapunov::{solve_lyapunov, LyapunovSolution};
pub use ode::{dopri5, fundamental_solution, monodromy, transition, MonodromyResult};
