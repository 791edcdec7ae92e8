"""Prompt templates used by the evaluation judges.

Templates are plain ``str.format`` strings. Everything a judge needs to be
reproducible lives here: changing a template changes cache keys, so edits
invalidate cached model responses naturally.
"""

COMPLETENESS_LABELS = ("Required", "Unnecessary", "Borderline", "Inappropriate")

COMPLETENESS = """\
You are an expert annotator. Given a question and an answer sentence, your task is to assign a single label from the following list: ['Required', 'Unnecessary', 'Borderline', 'Inappropriate']. The label definitions are as follows:
Required: The answer sentence is necessary to have in the generated answer for completeness of the answers.
Unnecessary: The answer sentence is not required to be included in the generated answer. An answer sentence may be unnecessary for several reasons:
1. If including it would cause information overload, if it is added to the answer;
2. If it is trivial, e.g., stating that many treatment options exist.
3. If it consists entirely of a recommendation to see a health professional.
4. If it is not relevant to the answer, e.g., describing the causes of a disease when the question is about treatments,
Borderline: If an answer sentence is relevant, possibly even "good to know," but not required, the answer sentence may be marked borderline.
Inappropriate: The assertion may harm the patient, e.g., if, according to the answer, physical therapy reduces the pain level, but the patient experiences more pain due to hip mobilization, the patient may start doubting they are receiving adequate treatment.
Do not generate anything else.
Respond ONLY with the label, no explanation.
Question : {question}
Answer Sentence: {answer_sentence}"""

BINARY_CITATION_LABELS = ("attributable", "not attributable")

BINARY_CITATION = """\
### Instruction:
Please solely verify whether the reference can support the claim. Options: 'attributable' or 'not attributable'.

### Input:

Claim: {claim}

Reference: {reference}

### Output:"""

TERNARY_CITATION_LABELS = ("support", "contradict", "neutral")

TERNARY_CITATION = """\
### Instruction:
Please solely verify whether the reference can support the claim. Options: 'support', 'contradict', or 'neutral'.

### Input:

Claim: {claim}

Reference: {reference}

### Output:"""

NUGGET_COMPARISON_LABELS = ("supports", "contradicts", "neutral", "not relevant")

NUGGET_COMPARISON = """\
For the following lists of answer and document nuggets, select one of the following labels:

Supports: There is at least one document nugget that supports/agrees with each answer nugget.
Contradicts: There is at least one document nugget that disagrees with an answer nugget or states its opposite.
Neutral: The document nuggets are topically relevant, but lack any information to validate or invalidate the all of the answer nuggets.
Not relevant: The document nuggets are not relevant to the answer nuggets.

Answer Nuggets: {answer_nuggets}

Document Nuggets: {document_nuggets}"""

NUGGET_GENERATION = """\
List all of the information nuggets in the text given below. Each nugget must contain one, and only one, fact from the text. A nugget must be as concise and as specific as possible. Each element in a list must be its own nugget. The list of nuggets must not contain redundant information. Return a list of nuggets such that each nugget is on a new line. Do not number or bullet the list. Do not include anything in your response except for the list of nuggets. Here is an example of the output format:

nugget1
nugget2
...

Here is an example text: During infections, a battle for iron takes place between the human host and the invading pathogens. Lymphocytes need iron to mount an effective cellular and humoral response. Viruses depend on iron to replicate within living host cells. During the acute phase of infection, blood levels of iron decrease. Ferritin levels are high. Elevated serum ferritin is associated with increased mortality. As a major iron storage protein, ferritin is essential to iron homeostasis and is involved in a wide range of physiologic and pathologic processes. The inflammation cascade and poor prognosis of COVID-19 may be attributed to high ferritin levels. Iron depletion therapy was proposed as a novel therapeutic approach in the COVID-19 pandemic.

This is the list of nuggets that should be extracted from this text:

Lymphocytes and viruses compete for iron.
Lymphocytes need iron for cellular response.
Lymphocytes need iron for humoral response.
Viruses need iron to replicate.
Infection lowers iron levels in the blood.
Infection increases ferritin levels in the blood.
High ferritin is associated with increased mortality.
Iron homeostasis needs ferritin.
Ferritin is involved in physiologic processes.
Ferritin is involved in pathologic processes.
High ferritin indicates response to inflammation.
High ferritin levels are linked to poor outcomes of COVID-19.
Iron depletion therapy showed anti-viral activity in the COVID-19 pandemic.
Iron depletion therapy showed anti-fibrotic activity in the COVID-19 pandemic.

Text: {text}"""

CORRECTNESS_LABELS = ("correct", "incorrect")

# Judge prompt for fragment-level correctness checks. Not tied to any
# external template; kept minimal and label-constrained.
CORRECTNESS_FRAGMENT = """\
You are verifying a biomedical answer sentence against an excerpt from a scientific abstract. Respond 'correct' if the excerpt supports the statement, otherwise 'incorrect'.
Respond ONLY with the label, no explanation.

Statement: {sentence}

Excerpt: {fragment}"""


def render_nugget_list(nuggets) -> str:
    """One nugget per line, hyphen-prefixed, for the comparison prompt."""
    return "\n".join(f"- {n}" for n in nuggets)
