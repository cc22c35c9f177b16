use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

const HEADER: &str = "t,p_last,P_tau,P_IH,lambda_IH,lambda_IL,T_IH,T_tau,P_aver,effective_n";

fn psima(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psima"))
        .args(args)
        .output()
        .unwrap()
}

fn psima_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_psima"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn missing_input_exits_2() {
    let out = psima(&["run", "--input", "/nonexistent/ticks.csv"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&psima(&["run", "--bogus"])), 1);
    assert_eq!(code(&psima(&["run", "--basis", "hermite"])), 1);
    assert_eq!(code(&psima(&["run", "--n", "0", "--input", "-"])), 1);
    assert_eq!(code(&psima(&["synth", "--spike", "1:2"])), 1);
    assert_eq!(code(&psima(&["synth", "--spike", "a:b:c"])), 1);
    let help = psima(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("synth"));
}

#[test]
fn malformed_rows_exit_2() {
    let out = psima_stdin(&["run"], b"0,100,5\n1,abc,5\n");
    assert_eq!(code(&out), 2);
    let out = psima_stdin(&["run"], b"5,100,5\n1,100,5\n");
    assert_eq!(code(&out), 2);
    assert_eq!(code(&psima_stdin(&["run"], b"")), 2);
}

#[test]
fn zero_volume_input_exits_3() {
    let out = psima_stdin(&["run"], b"0,100,0\n1,101,0\n2,102,0\n");
    assert_eq!(code(&out), 3);
}

#[test]
fn run_writes_header_and_one_row_per_trade() {
    let out = psima_stdin(
        &["run", "--tau", "30", "--n", "4"],
        b"time,price,shares\n0,100.0,50\n1,101.0,30\n",
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 3);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[2], 100.0);
    assert_eq!(first[3], 100.0);
}

#[test]
fn pipe_and_file_runs_match_bit_for_bit() {
    let ticks = scratch("pipe.csv");
    let synth = psima(&[
        "synth",
        "--seed",
        "7",
        "--duration",
        "2000",
        "--flow",
        "80",
        "--volatility",
        "0.001",
        "--spike",
        "900:20:30:1.5",
        "--output",
        ticks.to_str().unwrap(),
    ]);
    assert_eq!(code(&synth), 0);
    let from_file = psima(&["run", "--tau", "120", "--input", ticks.to_str().unwrap()]);
    let bytes = std::fs::read(&ticks).unwrap();
    let from_pipe = psima_stdin(&["run", "--tau", "120", "--input", "-"], &bytes);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_pipe.stdout);

    let out_path = scratch("pipe-out.csv");
    let to_file = psima(&[
        "run",
        "--tau",
        "120",
        "--input",
        ticks.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&to_file), 0);
    assert_eq!(std::fs::read(&out_path).unwrap(), from_file.stdout);
}

#[test]
fn synth_is_deterministic() {
    let a = psima(&["synth", "--seed", "11", "--duration", "500"]);
    let b = psima(&["synth", "--seed", "11", "--duration", "500"]);
    let c = psima(&["synth", "--seed", "12", "--duration", "500"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn grid_and_stddev_options() {
    let input = b"0,10,1\n1,11,1\n2,12,1\n3,13,1\n4,14,1\n5,15,1\n6,16,1\n";
    let out = psima_stdin(
        &["run", "--tau", "5", "--n", "3", "--grid", "2.5", "--stddev"],
        input,
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("{HEADER},P_tau_std"));
    let times: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(times, vec![0.0, 2.5, 5.0]);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 11));
}

#[test]
fn clock_times_use_the_date() {
    let input = b"09:30:00,100,10\n09:30:01.5,101,10\n";
    let out = psima_stdin(&["run", "--date", "2024-03-01", "--n", "2"], input);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let t: f64 = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(t, 1_709_285_400.0 + 1.5);

    let out = psima_stdin(&["run", "--n", "2"], input);
    let text = stdout(&out);
    let t: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(t, 34_200.0);
}

#[test]
fn selftest_passes() {
    let out = psima(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
