fn main() {
    let ds = ocsmm::data::synth_rotated_gaussians(3);
    let path = "/tmp/rt_debug.jsonl";
    ocsmm::data::save_jsonl(&ds, path).unwrap();
    let loaded = ocsmm::data::load_jsonl(path).unwrap();
    for (a, b) in ds.groups().iter().zip(loaded.groups()) {
        if a != b {
            println!("group {} differs:", a.id);
            println!("  id eq: {}", a.id == b.id);
            println!("  points eq: {}", a.points == b.points);
            println!("  omega: {:?} vs {:?}", a.omega, b.omega);
            println!("  summary eq: {}", a.summary == b.summary);
            println!("  label: {:?} vs {:?}", a.label, b.label);
            for (i, (p, q)) in a.points.iter().zip(&b.points).enumerate() {
                if p != q {
                    println!("  first point diff at {i}: {p:?} vs {q:?}");
                    for (x, y) in p.iter().zip(q.iter()) {
                        if x.to_bits() != y.to_bits() {
                            println!("    {x:.20e} ({:.16x}) vs {y:.20e} ({:.16x})", x.to_bits(), y.to_bits());
                        }
                    }
                    break;
                }
            }
            break;
        }
    }
    println!("done");
}
