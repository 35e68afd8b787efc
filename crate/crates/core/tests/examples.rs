//! Every program under `examples/` runs to completion.

#[allow(dead_code)]
mod graph_laplacian {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/graph_laplacian.rs"));
}

#[test]
fn graph_laplacian_example_runs() {
    graph_laplacian::run_example().expect("graph_laplacian example should run");
}

#[allow(dead_code)]
mod losses {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/losses.rs"));
}

#[test]
fn losses_example_runs() {
    losses::run_example().expect("losses example should run");
}

#[allow(dead_code)]
mod schedules {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/schedules.rs"));
}

#[test]
fn schedules_example_runs() {
    schedules::run_example().expect("schedules example should run");
}

#[allow(dead_code)]
mod distributed_sgd {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/distributed_sgd.rs"));
}

#[test]
fn distributed_sgd_example_runs() {
    distributed_sgd::run_example().expect("distributed_sgd example should run");
}

#[allow(dead_code)]
mod gradient_flow {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_flow.rs"));
}

#[test]
fn gradient_flow_example_runs() {
    gradient_flow::run_example().expect("gradient_flow example should run");
}

#[allow(dead_code)]
mod stable_manifold {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/stable_manifold.rs"));
}

#[test]
fn stable_manifold_example_runs() {
    stable_manifold::run_example().expect("stable_manifold example should run");
}

#[allow(dead_code)]
mod campaign {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/campaign.rs"));
}

#[test]
fn campaign_example_runs() {
    campaign::run_example().expect("campaign example should run");
}
