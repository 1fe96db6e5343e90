mod cli;

fn main() -> std::process::ExitCode {
    // Die quietly when a downstream pipe closes (`beepsim ... | head`)
    // instead of panicking on the next print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    cli::main()
}
