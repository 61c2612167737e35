// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(easic_cli::run_args(std::env::args_os()));
}
