//! Local HTTP service for interactive refinement of a segmented project.
//!
//! A project directory written by `shadowseg run` is loaded once; its
//! triangulation stays fixed while κ, A_min, manual merges and barriers
//! are edited over the API.

pub mod api;
pub mod session;

pub use api::{app, check_static_dir, router, ServiceOptions, SharedState, StartupError};
pub use session::{ServiceState, Session, SessionError};

/// Serves `router` on an already bound listener until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, router: axum::Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}
