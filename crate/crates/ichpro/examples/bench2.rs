use ichpro::tensor::Tape;
use std::time::Instant;

fn main() {
    // conv chain after loop restructure
    let t0 = Instant::now();
    for _ in 0..30 {
        let mut tape = Tape::new();
        let vol = tape.param(&[1, 32, 32, 32], &vec![0.1; 32768]).unwrap();
        let k1 = tape.param(&[4, 1, 3, 3, 3], &vec![0.05; 108]).unwrap();
        let k2 = tape.param(&[8, 4, 3, 3, 3], &vec![0.05; 864]).unwrap();
        let k3 = tape.param(&[16, 8, 3, 3, 3], &vec![0.05; 3456]).unwrap();
        let c1 = tape.conv3(vol, k1, 2).unwrap();
        let r1 = tape.relu(c1).unwrap();
        let c2 = tape.conv3(r1, k2, 2).unwrap();
        let r2 = tape.relu(c2).unwrap();
        let c3 = tape.conv3(r2, k3, 2).unwrap();
        let r3 = tape.relu(c3).unwrap();
        let gap = tape.global_avg_pool3(r3).unwrap();
        let loss = tape.sum_all(gap).unwrap();
        tape.backward(loss).unwrap();
    }
    println!("conv chain fwd+bwd: {:.2} ms", t0.elapsed().as_secs_f64() / 30.0 * 1000.0);

    // cross attention with fused-transpose matmuls and axis-0 softmax
    let t0 = Instant::now();
    for _ in 0..50 {
        let mut tape = Tape::new();
        let x = tape.param(&[256, 4], &vec![0.1; 1024]).unwrap();
        let y = tape.param(&[256, 4], &vec![0.2; 1024]).unwrap();
        let s = tape.matmul_nt(x, y).unwrap(); // [256,256]
        let beta = tape.softmax(s, 0).unwrap();
        let ox = tape.matmul_tn(beta, x).unwrap(); // [256,4]
        let t = tape.matmul_nt(y, x).unwrap();
        let rho = tape.softmax(t, 0).unwrap();
        let oy = tape.matmul_tn(rho, y).unwrap();
        let su = tape.add(ox, oy).unwrap();
        let loss = tape.sum_all(su).unwrap();
        tape.backward(loss).unwrap();
    }
    println!("cross-att fused fwd+bwd: {:.2} ms", t0.elapsed().as_secs_f64() / 50.0 * 1000.0);

    // mhsaf at S'=64 c=8
    let t0 = Instant::now();
    for _ in 0..200 {
        let mut tape = Tape::new();
        let f = tape.param(&[64, 8], &vec![0.1; 512]).unwrap();
        let wq = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let wk = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let wv = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let q = tape.matmul(f, wq).unwrap();
        let k = tape.matmul(f, wk).unwrap();
        let v = tape.matmul(f, wv).unwrap();
        let mut acc = None;
        for h in 0..4 {
            let qh = tape.slice_cols(q, h * 2, 2).unwrap();
            let kh = tape.slice_cols(k, h * 2, 2).unwrap();
            let vh = tape.slice_cols(v, h * 2, 2).unwrap();
            let sc = tape.matmul_nt(qh, kh).unwrap();
            let scs = tape.scale(sc, 1.0 / 2.0f64.sqrt()).unwrap();
            let a = tape.softmax(scs, 1).unwrap();
            let o = tape.matmul(a, vh).unwrap();
            acc = Some(match acc {
                None => o,
                Some(p) => tape.concat_cols(p, o).unwrap(),
            });
        }
        let loss = tape.sum_all(acc.unwrap()).unwrap();
        tape.backward(loss).unwrap();
    }
    println!("mhsaf S'=64 fwd+bwd: {:.2} ms", t0.elapsed().as_secs_f64() / 200.0 * 1000.0);
}
