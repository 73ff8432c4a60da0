//! Counts BAPs and DAGs on small vertex sets and lists the two-vertex BAPs.
use bapsearch::graph::enumerate;
use bapsearch::GraphClass;

fn main() -> bapsearch::Result<()> {
    for d in 1..=4 {
        let baps = enumerate(d, GraphClass::Bap)?.len();
        let dags = enumerate(d, GraphClass::Dag)?.len();
        println!("d={d}: {baps} BAPs, {dags} DAGs");
    }
    for g in enumerate(2, GraphClass::Bap)? {
        println!("  {g}");
    }
    Ok(())
}
