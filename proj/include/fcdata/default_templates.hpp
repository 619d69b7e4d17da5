#pragma once

// Bundled prompt templates. templates/*.txt hold the same text; a unit test
// keeps the two in sync.

#include <string_view>

namespace fcdata::default_templates {

inline constexpr std::string_view kConsistencyChecker = R"tmpl(## Role:
You are a Tool Call Consistency Checker.

## You will receive:
- Generated user query: {{query}}

- Tool definition: {{tools}}

- Generated tool_call JSON: {{tool_call}}

## Your task:
1. Carefully read the generated user query and understand the intended action.
2. Review the tool definition to understand each parameter's meaning and constraints.
3. Check the parameter values in tool_call:
    - Do they match the intent and details in the user query?
    - Are they internally consistent (no contradictions between parameters)?
    - Do they comply with the tool definition (value types, required fields, allowed ranges)?
4. Decide if the tool_call is logically correct:
    - If all parameters reflect the query correctly and satisfy the tool's definition, return "Consistent".
    - If there is any mismatch or logical conflict, return "Inconsistent".

## Output format requirements:
- Return a (JSON list) containing exactly one object:
[{
    "analysis": "...your reasoning here...",
    "result": "Consistent" or "Inconsistent"
}]

## Rules:
    - Do not output anything outside the JSON list.
    - Be strict - even small inconsistencies should be marked "Inconsistent".
)tmpl";

inline constexpr std::string_view kFewShotGenerator = R"tmpl(## Role:
You are an expert assistant capable of accurately selecting and calling functions (tools) to answer questions.

## Input:
1. A set of FIVE few-shot examples, each containing:
    - A user query
    - A toolset with tool names, descriptions, and parameters
    - The correct tool calls for that query in strict JSON list format
2. The CURRENT user query we need to process
3. The CURRENT toolset specification

## Your task:
    - Carefully study the five examples to understand how queries are mapped to tool calls.
    - For the CURRENT query, use ONLY the tools provided in the CURRENT toolset, along with their descriptions, to determine the exact functions to call and the correct values of their parameters.
    - Parameter values MUST be derived accurately from the query context or the tool definitions.
    - If no tool is required, output an empty list: [].

## Output requirements:
    - You MUST follow the exact JSON list format below.
    - DO NOT include any extra explanations, comments, or text outside the JSON.
    - Ensure parameter types are correct (string, integer, float, etc.).

## Expected JSON format:
[{
    "name": "func_name1", "arguments": {"argument1": "value1", "argument2": "value2"}},
    ... (more tool calls as required)
}]

### Few-shot Examples:
{{FEW_SHOT_EXAMPLES}}

### Current Query:
{{CURRENT_QUERY}}

### Current Toolset:
{{CURRENT_TOOLSET}}

Please output the JSON list strictly according to the specifications above.
)tmpl";

inline constexpr std::string_view kCounterfactualGeneration = R"tmpl(# Role:
A specialist in mitigating data bias through multi-round distribution-aware counterfactual generation.

# Multi-Round Generation Context (Step {step}):
We are in a multi-round generation process to mitigate distribution collapse in parameter "{tool_param}".

## Initial State (Before Generation):
    - Global Entropy: {initial_state['global_entropy']:.4f}
    - Local Entropy: {initial_state['local_entropy']:.4f}
    - Entropy Ratio: {initial_state['entropy_ratio']:.4f}
## Current State (After {step-1} rounds):
    - Global Entropy: {current_state['global_entropy']:.4f} (change: {current_state['global_entropy'] - initial_state['global_entropy']:+.4f})
    - Local Entropy: {current_state['local_entropy']:.4f} (change: {current_state['local_entropy'] - initial_state['local_entropy']:+.4f})
    - Entropy Ratio: {current_state['entropy_ratio']:.4f} (change: {current_state['entropy_ratio'] - initial_state['entropy_ratio']:+.4f})
    - Target: Increase entropy ratio to ⩾ {blind_entropy_ration_threshold}
    - History: {history_desc}

# Parameter Value Distributions:
## Initial Distributions:
GLobal: {initial_global_dist_desc}, Local: {initial_local_dist_desc}
## Current Distributions:
Glocal: {current_global_dist_desc}, Local: {current_local_dist_desc}

# Instructions
    * Contains an instruction for tool usage: """{instruction}"""
# History
    * Contains the user's historical conversation information: """{input_text}"""
# Original Example:
    - Query: "{user_query}", Tool Call: {tool_call}

# Stable Parameter Context:
To prevent creating new distribution collapses, the values for the following parameters in the `new_tool_call` MUST remain consistent with their existing distributions.
{stable_params_desc}
Your primary goal is to fix `{tool_param}`, but a CRITICAL secondary goal is to NOT disrupt these other parameters.

# Task for Round {step}:
Based on the multi-round generation progress, generate NEW data points to further increase local parameter diversity:
1. **Learn from previous rounds**: Analyze what values were generated and their impact.
2. **Focus on current gaps**: Target parameter values that are still underrepresented in local distribution.
3. **Avoid redundancy**: Don't generate values that were already created in previous rounds.
4. **Strategic selection**: Choose values that will maximally increase the entropy ratio.
5. **Maintain coherence**: Ensure semantic consistency within the cluster context.
6. **Diversify query expressions**: Generate queries with varied linguistic forms but similar semantics, avoiding mere entity substitution.
7. **Preserve tool_call logical coherence**: All parameter values in the generated tool_call must maintain logical consistency.

# JSON Output Format:
[{
    "new_query": "...",
    "new_value_for_{tool_param.split('.')[-1]}": "...",
    "new_tool_call": "...",
    "step_rationale": "Strategic explanation for Round {step}"
}]
)tmpl";

inline constexpr std::string_view kSystemReasoning = R"tmpl(## Role:
You are a helpful AI assistant with access to various tools…

## Tools:
{{TOOLS}}

## Requirement:
* Provide your reasoning process in natural language.
* Output the tool_call in the specified json format.

## Output format:
"""
<plan> [Your detailed reasoning]</plan>
<tool_call>[The actual function call]</tool_call>
"""
)tmpl";

inline constexpr std::string_view kSystemDirect = R"tmpl(## Role:
You are a helpful AI assistant with access to various tools…

## Tools:
{{TOOLS}}

## Requirement:
* Do not provide your reasoning process.
* Directly output the tool_call in the specified json format.

## Output format:
"""
<tool_call>[The actual function call]</tool_call>
"""
)tmpl";

}  // namespace fcdata::default_templates
