fn main() {
    println!("{} {}", pdmp_core::probe_svd(), pdmp_core::probe_distr(7));
}
