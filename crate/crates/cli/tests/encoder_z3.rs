//! Encoder self-tests discharged by the solver.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use convergent::solver::{Solver, Status};
use convergent_core::consistency::{Frame, Rel};
use convergent_core::encoder::{encode_commutativity, encode_functionality, encode_policy_axioms};
use convergent_core::opsem::{Budget, Explorer};
use convergent_core::spec::BUILTIN_NAMES;
use convergent_core::{builtin, Effector, Policy};

fn solver() -> Solver {
    Solver::locate(None, Duration::from_secs(120)).expect("z3 on PATH")
}

#[test]
fn simple_set_adds_commute_but_add_and_remove_do_not() {
    let s = builtin("simple-set").unwrap();
    let z = solver();
    assert_eq!(z.run(&encode_commutativity(&s, "Add", "Add")).unwrap().status, Status::Unsat);
    assert_eq!(z.run(&encode_commutativity(&s, "Remove", "Remove")).unwrap().status, Status::Unsat);
    assert_eq!(z.run(&encode_commutativity(&s, "Add", "Remove")).unwrap().status, Status::Sat);
}

/// Out of context, a Remove may see the identifier its concurrent Add is
/// about to allocate; only executions rule that out.
#[test]
fn orset_add_and_remove_commute_only_in_executions() {
    let s = builtin("orset").unwrap();
    let z = solver();
    assert_eq!(z.run(&encode_commutativity(&s, "Add", "Remove")).unwrap().status, Status::Sat);
    assert_eq!(z.run(&encode_commutativity(&s, "Add", "Add")).unwrap().status, Status::Unsat);
}

#[test]
fn every_operation_is_functional() {
    let z = solver();
    for name in BUILTIN_NAMES {
        let s = builtin(name).unwrap();
        for op in &s.ops {
            let r = z.run(&encode_functionality(&s, &op.name)).unwrap();
            assert_eq!(r.status, Status::Unsat, "{name}.{}", op.name);
        }
    }
}

/// Pins the axiom script to one concrete frame per `push`/`pop` block and
/// compares each answer with the executable policy.
#[test]
fn policy_axioms_match_executable_policy_in_the_solver() {
    let spec = builtin("simple-set").unwrap();
    let z = solver();
    for policy in [Policy::Ec, Policy::Cc, Policy::Psi, Policy::psi_rb(&[("Add", "Remove")]), Policy::Sc] {
        for n in 2..=3 {
            let base = encode_policy_axioms(&spec, &policy, n).text;
            let mut script = base.replace("(check-sat)\n(get-model)\n", "");
            let mut expected = Vec::new();
            for exec in Explorer::new(&spec, &Policy::Ec, Budget::default()).enumerate(3) {
                let c = &exec.config;
                if c.events.len() != n {
                    continue;
                }
                let ops: Vec<&str> = c.events.iter().map(|e| e.op.op.as_str()).collect();
                let effs: Vec<&Effector> = c.events.iter().map(|e| &e.effector).collect();
                let forced = policy.forced_eo(&Frame { ops: &ops, effs: &effs, vis: &c.vis, eo: &Rel::new() });
                for eo in [forced, Rel::new(), c.vis.clone()] {
                    let f = Frame { ops: &ops, effs: &effs, vis: &c.vis, eo: &eo };
                    expected.push(policy.holds(&f));
                    script += "(push)\n";
                    for (i, e) in c.events.iter().enumerate() {
                        script += &format!("(assert sel{i}_{})\n", e.op.op);
                    }
                    for i in 0..n {
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let (a, b) = (&c.events[i], &c.events[j]);
                            if i < j {
                                let eq = a.op.args[0] == b.op.args[0];
                                let t = format!("(= arg{i}_{}_a arg{j}_{}_a)", a.op.op, b.op.op);
                                script += &format!("(assert {})\n", if eq { t } else { format!("(not {t})") });
                            }
                            let lit = |name: String, on: bool| if on { name } else { format!("(not {name})") };
                            script += &format!("(assert {})\n", lit(format!("v{i}{j}"), c.vis.contains(&(i, j))));
                            script += &format!("(assert {})\n", lit(format!("eo{i}{j}"), eo.contains(&(i, j))));
                        }
                    }
                    script += "(check-sat)\n(pop)\n";
                }
            }
            let answers = run_batch(&z, &script);
            assert_eq!(answers.len(), expected.len(), "{policy} n={n}");
            for (k, (got, want)) in answers.iter().zip(&expected).enumerate() {
                assert_eq!(got == "sat", *want, "{policy} n={n} case {k}");
            }
        }
    }
}

fn run_batch(z: &Solver, script: &str) -> Vec<String> {
    let mut child = Command::new(&z.path)
        .arg("-in")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect()
}
