// Temporary convergence probe; removed before release.
use graphot::solver::{solve, SolverConfig};
use graphot::{Graph, VertexDistribution};

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let kind = args.get(1).map(String::as_str).unwrap_or("two");
    let k: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let (g, a, b) = match kind {
        "path" => {
            let g = Graph::new(k + 1, (0..k).map(|i| (i, i + 1)).collect()).unwrap();
            let a = VertexDistribution::indicator(k + 1, 0).unwrap();
            let b = VertexDistribution::indicator(k + 1, k).unwrap();
            (g, a, b)
        }
        "ref" => {
            // d=10 line refined with the given k.
            let n = 11;
            let g = Graph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap();
            let a = VertexDistribution::indicator(n, 0).unwrap();
            let b = VertexDistribution::indicator(n, n - 1).unwrap();
            (g, a, b)
        }
        _ => {
            let g = Graph::new(2, vec![(0, 1)]).unwrap();
            let a = VertexDistribution::indicator(2, 0).unwrap();
            let b = VertexDistribution::indicator(2, 1).unwrap();
            (g, a, b)
        }
    };
    let start = std::time::Instant::now();
    match solve(&g, &a, &b, k, &SolverConfig::default()) {
        Ok(path) => println!(
            "k={k} distance {} obj {} iters {} feas {:.2e} in {:?}",
            path.distance,
            path.objective,
            path.report.iterations,
            path.report.feasibility_residual,
            start.elapsed()
        ),
        Err(e) => println!("error: {e}"),
    }
}
