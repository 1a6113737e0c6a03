#![allow(dead_code)]

/// Reference interpreter for the tape language, written without a
/// precomputed jump table: bracket partners are found by scanning at run
/// time, and the tape is a map from cell index to value.
pub struct Reference {
    pub output: Vec<bool>,
    pub halted: bool,
    pub steps: usize,
}

fn find_close(ops: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0i64;
    for (q, &op) in ops.iter().enumerate().skip(open) {
        match op {
            4 => depth += 1,
            5 => {
                depth -= 1;
                if depth == 0 {
                    return Some(q);
                }
            }
            _ => {}
        }
    }
    None
}

fn find_open(ops: &[u8], close: usize) -> Option<usize> {
    let mut depth = 0i64;
    for q in (0..=close).rev() {
        match ops[q] {
            5 => depth += 1,
            4 => {
                depth -= 1;
                if depth == 0 {
                    return Some(q);
                }
            }
            _ => {}
        }
    }
    None
}

pub fn reference_run(code: &[u8], input: &[bool], step_limit: usize) -> Reference {
    let ops: Vec<u8> = code.iter().map(|b| b % 8).collect();
    let mut tape = std::collections::HashMap::<i64, u8>::new();
    let mut head = 0i64;
    let mut pc = 0usize;
    let mut read = 0usize;
    let mut output = Vec::new();
    let mut steps = 0usize;
    loop {
        if pc >= ops.len() {
            return Reference {
                output,
                halted: true,
                steps,
            };
        }
        if steps >= step_limit {
            return Reference {
                output,
                halted: false,
                steps,
            };
        }
        steps += 1;
        let cell = *tape.get(&head).unwrap_or(&0);
        match ops[pc] {
            0 => head += 1,
            1 => head -= 1,
            2 => {
                tape.insert(head, cell.wrapping_add(1));
            }
            3 => {
                tape.insert(head, cell.wrapping_sub(1));
            }
            4 => {
                if cell == 0 {
                    if let Some(q) = find_close(&ops, pc) {
                        pc = q + 1;
                        continue;
                    }
                }
            }
            5 => {
                if cell != 0 {
                    if let Some(p) = find_open(&ops, pc) {
                        pc = p;
                        continue;
                    }
                }
            }
            6 => {
                let bit = input.get(read).copied().unwrap_or(false);
                read += 1;
                tape.insert(head, u8::from(bit));
            }
            _ => output.push(cell % 2 == 1),
        }
        pc += 1;
    }
}
