fn main() {
    // Link the system LAPACK (provided via the distribution's alternatives
    // mechanism); only dsyevd/dgesv are used, through lapack-sys' raw FFI.
    println!("cargo:rustc-link-lib=dylib=lapack");
}
