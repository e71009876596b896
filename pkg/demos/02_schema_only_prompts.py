"""Schema-only prompting.

The QA prompt carries column names and data types, assumptions, and the
question. Cell values never leave the process, which keeps the prompt small
(typically under 250 estimated tokens) and the data private. Completions are
parsed back into lint-checked query text.
"""

from dfqa.model import (
    ColumnSpec,
    Dtype,
    MitigationFlag,
    Question,
    SupplementarySpec,
    TableSchema,
)
from dfqa.prompts import build_qa_prompt, extract_code, quote_literal_phrases

schema = TableSchema(
    "electorates",
    (
        ColumnSpec("Electorate", Dtype.STRING),
        ColumnSpec("Province", Dtype.STRING),
        ColumnSpec("Formed", Dtype.FLOAT),
    ),
)
supplementary = SupplementarySpec.from_flags(
    flags=(MitigationFlag.LOWERCASE_DIRECTIVE, MitigationFlag.NO_IMPORT_DIRECTIVE)
)
question = Question("demo-1", "which province is bay of islands in?")

prompt = build_qa_prompt(supplementary, schema, question)
for message in prompt.messages:
    print(f"--- {message.role} ---")
    print(message.content)
print("token estimate:", prompt.token_estimate)

print("\nliteral-phrase quoting (value-retrieval mitigation):")
print(quote_literal_phrases("which province is grey and bell electorate in?",
                            ["Electorate", "Province"]))

completion = """Sure, here is the query:
```python
result = df.loc[df['Electorate'] == 'bay of islands', 'Province'].iloc[0]
```
"""
query = extract_code(completion)
print("\nextracted query:", query.source)
print("lint findings:", [f.value for f in query.lint])

sloppy = extract_code("import pandas as pd\n# look up the province\ndf[df['Electorate']=='bay of islands']")
print("sloppy completion lint:", [f.value for f in sloppy.lint])
