use ichpro::tensor::Tape;
use std::time::Instant;

fn time_it(name: &str, reps: usize, mut f: impl FnMut()) {
    let t0 = Instant::now();
    for _ in 0..reps {
        f();
    }
    println!("{name}: {:.2} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1000.0);
}

fn main() {
    time_it("conv chain fwd+bwd", 30, || {
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
    });

    time_it("cross-att S=256 d=4 fwd+bwd", 30, || {
        let mut tape = Tape::new();
        let x = tape.param(&[256, 4], &vec![0.1; 1024]).unwrap();
        let y = tape.param(&[256, 4], &vec![0.2; 1024]).unwrap();
        let yt = tape.transpose(y).unwrap();
        let s = tape.matmul(x, yt).unwrap();
        let st = tape.transpose(s).unwrap();
        let beta = tape.softmax(st, 1).unwrap();
        let ox = tape.matmul(beta, x).unwrap();
        let xt = tape.transpose(x).unwrap();
        let t = tape.matmul(y, xt).unwrap();
        let tt = tape.transpose(t).unwrap();
        let rho = tape.softmax(tt, 1).unwrap();
        let oy = tape.matmul(rho, y).unwrap();
        let su = tape.add(ox, oy).unwrap();
        let loss = tape.sum_all(su).unwrap();
        tape.backward(loss).unwrap();
    });

    time_it("mhsaf-ish S=256 c=8 4 heads fwd+bwd", 30, || {
        let mut tape = Tape::new();
        let f = tape.param(&[256, 8], &vec![0.1; 2048]).unwrap();
        let wq = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let wk = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let wv = tape.param(&[8, 8], &vec![0.05; 64]).unwrap();
        let q = tape.matmul(f, wq).unwrap();
        let k = tape.matmul(f, wk).unwrap();
        let v = tape.matmul(f, wv).unwrap();
        let mut heads = Vec::new();
        for h in 0..4 {
            let qh = tape.slice_cols(q, h * 2, 2).unwrap();
            let kh = tape.slice_cols(k, h * 2, 2).unwrap();
            let vh = tape.slice_cols(v, h * 2, 2).unwrap();
            let kt = tape.transpose(kh).unwrap();
            let sc = tape.matmul(qh, kt).unwrap();
            let scs = tape.scale(sc, 1.0 / 2.0f64.sqrt()).unwrap();
            let a = tape.softmax(scs, 1).unwrap();
            let o = tape.matmul(a, vh).unwrap();
            heads.push(o);
        }
        let mut acc = heads[0];
        for h in &heads[1..] {
            acc = tape.concat_cols(acc, *h).unwrap();
        }
        let loss = tape.sum_all(acc).unwrap();
        tape.backward(loss).unwrap();
    });

    time_it("trt fc 144->2048 fwd+bwd", 100, || {
        let mut tape = Tape::new();
        let g = tape.param(&[1, 144], &vec![0.1; 144]).unwrap();
        let w = tape.param(&[144, 2048], &vec![0.01; 294912]).unwrap();
        let o = tape.matmul(g, w).unwrap();
        let loss = tape.sum_all(o).unwrap();
        tape.backward(loss).unwrap();
    });

    time_it("softpool 16x16x4 x4 fwd+bwd", 100, || {
        let mut tape = Tape::new();
        let a = tape.param(&[256, 4], &vec![0.3; 1024]).unwrap();
        let p1 = tape.softpool2d(a, 16, 16, 2, 2).unwrap();
        let p2 = tape.softpool2d(a, 16, 16, 2, 2).unwrap();
        let p3 = tape.softpool2d(a, 16, 16, 2, 2).unwrap();
        let p4 = tape.softpool2d(a, 16, 16, 2, 2).unwrap();
        let s1 = tape.add(p1, p2).unwrap();
        let s2 = tape.add(p3, p4).unwrap();
        let s = tape.add(s1, s2).unwrap();
        let loss = tape.sum_all(s).unwrap();
        tape.backward(loss).unwrap();
    });
}
