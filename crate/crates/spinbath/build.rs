fn main() {
    // lapack-sys only declares the FFI symbols; the system OpenBLAS carries
    // both the BLAS and LAPACK implementations.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
