fn main() {
    // Link against the system OpenBLAS, which bundles LAPACK on Debian/Ubuntu
    // (libopenblas-dev). Override with PROJSUM_BLAS_LIB=<name> if the LAPACK
    // symbols live in a differently named library on your system.
    let lib = std::env::var("PROJSUM_BLAS_LIB").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib=dylib={lib}");
    println!("cargo:rerun-if-env-changed=PROJSUM_BLAS_LIB");
}
