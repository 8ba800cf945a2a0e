//! Starts the HTTP API on 127.0.0.1:8080 (or the port given as argument).
//!
//! ```text
//! curl -s localhost:8080/api/health
//! curl -s -X POST localhost:8080/api/phantom -H 'content-type: application/json' \
//!   -d '{"width":200,"height":160,"teeth":[{"center_col":100,"crown_width":34,"root_length":85,"cej_row":50,"bone_offset_left":12,"bone_offset_right":20}]}'
//! ```

use perio::pipeline::service::{serve, ServiceState};

#[tokio::main]
async fn main() -> perio::Result<()> {
    let port: u16 = std::env::args().nth(1).and_then(|p| p.parse().ok()).unwrap_or(8080);
    let addr = ([127, 0, 0, 1], port).into();
    println!("listening on http://{addr}");
    serve(addr, ServiceState::new(None)).await
}
