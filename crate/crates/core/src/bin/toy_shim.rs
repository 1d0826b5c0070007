//! Runner shim for the toy candidate language. Reads requests on stdin,
//! answers on stdout, and sends program prints to stderr.

use std::io::{self, BufWriter};

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = BufWriter::new(io::stdout().lock());
    incoherence::toy::serve(stdin.lock(), stdout, io::stderr())
}
