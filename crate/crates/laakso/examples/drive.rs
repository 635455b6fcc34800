use laakso::{ball_measure, distance, geodesic, segment_decomposition, LaaksoPoint, MeasureSpec, Triadic};

fn main() {
    let x = LaaksoPoint::new(Triadic::new(13, 3), "010110".parse().unwrap()).unwrap();
    let y = LaaksoPoint::new(Triadic::new(5, 2), "110010".parse().unwrap()).unwrap();
    let d = distance(&x, &y).unwrap();
    println!("d(x, y) = {d}");

    let path = geodesic(&x, &y).unwrap();
    path.validate().unwrap();
    println!("geodesic: {} segments, {} jumps, length {}", path.segments.len(), path.jumps.len(), path.total_length);

    let dec = segment_decomposition(&x, &y).unwrap();
    println!("decomposition orders: {:?}", dec.orders);

    let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
    let bounds = ball_measure(&spec, &x, &Triadic::new(1, 2), &Triadic::unit(5)).unwrap();
    println!("mu B(x, 1/9) in [{}, {}]", bounds.lower, bounds.upper);
}
