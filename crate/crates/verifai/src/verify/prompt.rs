//! Byte-stable prompt templates for the external model.

use crate::lake::{DataInstance, DataObject, Table};

use super::ContractError;

/// Instruction lines; covered by golden tests.
pub const COMPLETION_INSTRUCTION: &str = "Please fill the missing values, annotated by NaN";
pub const VERIFICATION_INSTRUCTION: &str =
    "Please use the evidence below to validate the generative data.";
pub const RESULT_LINE: &str = "Result: Verified/Refuted/Not Related + Further explanation";

/// Tuple-completion prompt: question header, table name, header row, data
/// rows (tab-separated), closing instruction. The table must contain at
/// least one "NaN" cell.
pub fn render_completion_prompt(tbl: &Table) -> Result<String, ContractError> {
    if !tbl.rows.iter().flatten().any(|c| c == "NaN") {
        return Err(ContractError("table has no NaN cell to fill".into()));
    }
    let mut lines = vec!["Question:".to_string(), tbl.name.clone(), tbl.schema.join("\t")];
    for row in &tbl.rows {
        lines.push(row.join("\t"));
    }
    lines.push(COMPLETION_INSTRUCTION.to_string());
    Ok(lines.join("\n"))
}

/// Verification prompt: instruction, serialized evidence, serialized object,
/// result line.
pub fn render_verification_prompt(g: &DataObject, x: &DataInstance) -> String {
    format!(
        "{VERIFICATION_INSTRUCTION}\nEvidence: {}\nGenerative Data: {}\n{RESULT_LINE}",
        x.serialized(),
        g.query_text(),
    )
}
