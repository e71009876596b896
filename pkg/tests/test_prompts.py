import itertools
import random

import pytest

from dfqa.model import (
    ColumnSpec,
    DataTable,
    Dtype,
    LintFinding,
    MitigationFlag,
    Question,
    SupplementarySpec,
    TableSchema,
)
from dfqa.prompts import (
    EmptyCompletion,
    ErrorClass,
    build_error_classification_prompt,
    build_generation_prompt,
    build_qa_prompt,
    extract_code,
    load_error_classes,
    load_roles,
    parse_error_classes,
    quote_literal_phrases,
    render_error_classes,
    render_sample_rows,
    render_schema_block,
)
from tests.conftest import make_schema

SUPP = SupplementarySpec.from_flags(
    flags=(MitigationFlag.LOWERCASE_DIRECTIVE, MitigationFlag.NO_IMPORT_DIRECTIVE)
)


class TestQaPrompt:
    def test_minimal_schema_lists_columns_and_no_cells(self):
        schema = make_schema(a=Dtype.INT)
        bundle = build_qa_prompt(SUPP, schema, Question("q", "max of a?"))
        text = "\n".join(m.content for m in bundle.messages)
        assert "a: int" in text
        assert bundle.messages[0].role == "system"
        assert bundle.messages[1].role == "user"

    def test_token_estimate_under_250_for_typical_wikisql_task(self):
        schema = make_schema(
            **{"No. in season": Dtype.FLOAT, "Title": Dtype.STRING,
               "Directed by": Dtype.STRING, "Written by": Dtype.STRING,
               "Original air date": Dtype.STRING, "Production code": Dtype.STRING}
        )
        q = Question("q", "who directed the episode with production code 176252?")
        bundle = build_qa_prompt(SUPP, schema, q)
        assert bundle.token_estimate < 250

    def test_description_rendered_only_with_flag(self):
        schema = TableSchema("t", (ColumnSpec("num", Dtype.INT, description="diagnosis of heart disease"),))
        q = Question("q", "how severe?")
        without = build_qa_prompt(SUPP, schema, q)
        spec = SupplementarySpec.from_flags(flags=(MitigationFlag.COLUMN_DESCRIPTIONS,))
        with_flag = build_qa_prompt(spec, schema, q)
        assert "diagnosis of heart disease" not in without.messages[1].content
        assert "diagnosis of heart disease" in with_flag.messages[1].content

    def test_format_hint_rendered_with_flag(self):
        schema = TableSchema("t", (ColumnSpec("Date", Dtype.STRING, format_hint="january, 1"),))
        spec = SupplementarySpec.from_flags(flags=(MitigationFlag.DATE_FORMAT_HINTS,))
        bundle = build_qa_prompt(spec, schema, Question("q", "which team played on december 5?"))
        assert "january, 1" in bundle.messages[1].content

    def test_lowercase_directive_lands_in_system_message(self):
        schema = make_schema(a=Dtype.STRING)
        bundle = build_qa_prompt(SUPP, schema, Question("q", "what?"))
        assert "lowercase" in bundle.messages[0].content

    def test_quote_values_flag_rewrites_question(self):
        spec = SupplementarySpec.from_flags(flags=(MitigationFlag.QUOTE_VALUES,))
        schema = make_schema(Electorate=Dtype.STRING, Province=Dtype.STRING)
        bundle = build_qa_prompt(spec, schema, Question("q", "which province is grey and bell electorate in?"))
        assert '"' in bundle.messages[1].content

    def test_privacy_over_randomized_sentinel_tables(self):
        rng = random.Random(2024)
        for i in range(50):
            n_cols = rng.randint(1, 6)
            names = [f"col{i}_{j}" for j in range(n_cols)]
            schema = TableSchema(
                f"t{i}", tuple(ColumnSpec(n, Dtype.STRING) for n in names)
            )
            sentinels = [[f"SENTINEL_{i}_{j}_{k}" for j in range(n_cols)] for k in range(3)]
            DataTable(schema, tuple(tuple(r) for r in sentinels))
            bundle = build_qa_prompt(SUPP, schema, Question("q", "anything?"))
            text = "\n".join(m.content for m in bundle.messages)
            for row in sentinels:
                for cell in row:
                    assert cell not in text
            block = render_schema_block(schema, SUPP.mitigation_flags)
            for name in names:
                assert block.count(name) == 1


class TestQuoteHeuristic:
    @pytest.mark.parametrize(
        "question,expected",
        [
            ("which province is bay of islands in?", 'which province is "bay of islands" in?'),
            ("which team played on december 5?", 'which team played on "december 5"?'),
            (
                "what is the total amount of allied-unrelated where the component is human capital?",
                'what is the total amount of allied-unrelated where the component is "human capital"?',
            ),
        ],
    )
    def test_known_rewrites(self, question, expected):
        assert quote_literal_phrases(question) == expected

    def test_already_quoted_left_alone(self):
        q = 'which province is "bay of islands" in?'
        assert quote_literal_phrases(q) == q

    def test_column_name_not_quoted(self):
        q = "what is the maximum of score?"
        assert quote_literal_phrases(q, ["score"]) == q


class TestExtractCode:
    def test_fenced_block_extracted(self):
        source = "result = df.loc[df['Electorate']=='bay of islands', 'Province'].iloc[0]"
        completion = f"Here you go:\n```python\n{source}\n```\nThat should work."
        query = extract_code(completion)
        assert query.source == source
        assert query.lint == ()

    def test_import_and_comments_linted(self):
        completion = "import pandas as pd\n# group the dataframe by sex\nresult = df.groupby('Sex')['Length'].mean()"
        query = extract_code(completion)
        assert LintFinding.HAS_IMPORT in query.lint
        assert LintFinding.HAS_COMMENTS in query.lint
        assert LintFinding.MISSING_RESULT_ASSIGNMENT not in query.lint

    def test_bare_expression_lints_missing_result(self):
        query = extract_code("df.groupby('ca')['trestbps'].var()")
        assert query.lint == (LintFinding.MISSING_RESULT_ASSIGNMENT,)

    def test_language_tag_stripped_without_fence(self):
        query = extract_code("python\nresult = 1")
        assert query.source == "result = 1"

    def test_empty_completion_raises(self):
        with pytest.raises(EmptyCompletion):
            extract_code("   \n  ")
        with pytest.raises(EmptyCompletion):
            extract_code("```python\n\n```")

    def test_idempotent_on_own_output(self):
        completions = [
            "```python\nresult = 1\n```",
            "no fence at all\nresult = 2",
            "```\nresult = df['a'].sum()\n```trailing",
        ]
        for completion in completions:
            once = extract_code(completion).source
            assert extract_code(once).source == once


class TestGenerationPrompt:
    def test_embeds_role_paragraph_verbatim_and_count(self):
        roles = load_roles()
        schema = make_schema(
            Sex=Dtype.STRING, Length=Dtype.FLOAT, Rings=Dtype.INT
        )
        bundle = build_generation_prompt(schema, "data_scientist", 20)
        text = bundle.messages[0].content
        assert roles["data_scientist"] in text
        assert "20" in text
        for name in ("Sex", "Length", "Rings"):
            assert name in text

    def test_general_user_role_requires_open_ended_phrasing(self):
        schema = make_schema(a=Dtype.INT)
        bundle = build_generation_prompt(schema, "general_user", 1)
        assert "avoiding direct references to specific column names" in bundle.messages[0].content

    def test_no_cell_values_by_construction(self):
        schema = make_schema(a=Dtype.STRING)
        bundle = build_generation_prompt(schema, "data_owner", 5)
        assert "SENTINEL" not in bundle.messages[0].content

    def test_invalid_inputs(self):
        schema = make_schema(a=Dtype.INT)
        with pytest.raises(Exception):
            build_generation_prompt(schema, "data_scientist", 0)
        with pytest.raises(Exception):
            build_generation_prompt(schema, "mystery_role", 1)


class TestClassificationPrompt:
    def _record(self, **overrides):
        record = {
            "question": "what is terrence ross' nationality",
            "sample_rows": "Player | Nationality\nterrence ross | united states",
            "query": "result = df[df['Player']=='Terrence Ross']['Nationality'].values[0]",
            "exec_output": "error: index 0 is out of bounds",
            "expected": "united states",
        }
        record.update(overrides)
        return record

    def test_embeds_all_record_parts_and_class_names(self):
        bundle = build_error_classification_prompt(self._record())
        text = bundle.messages[0].content
        assert "terrence ross" in text.lower()
        assert "united states" in text
        for cls in load_error_classes():
            assert cls["abbreviation"] in text

    def test_empty_output_renders_placeholder(self):
        bundle = build_error_classification_prompt(self._record(exec_output=""))
        assert "(no output)" in bundle.messages[0].content

    def test_sample_rows_renderer_limits_rows(self):
        schema = make_schema(a=Dtype.INT)
        table = DataTable(schema, tuple((i,) for i in range(10)))
        rendered = render_sample_rows(table, limit=3)
        assert rendered.splitlines()[0] == "a"
        assert len(rendered.splitlines()) == 4


class TestParseErrorClasses:
    def test_simple_abbreviations(self):
        assert parse_error_classes("String Error; Condition Error") == {
            ErrorClass.STRING_ERROR,
            ErrorClass.CONDITION_ERROR,
        }

    def test_gibberish_defaults_to_others(self):
        assert parse_error_classes("entirely unrelated text") == {ErrorClass.OTHERS}

    def test_full_names_from_narrative_response(self):
        response = (
            "The query erroneously capitalizes the player's name. This is a "
            "String Matching and Comparison Error, as well as a Query Condition "
            "and Value Error: lowercase search criteria should be used."
        )
        assert parse_error_classes(response) == {
            ErrorClass.STRING_ERROR,
            ErrorClass.CONDITION_ERROR,
        }

    def test_render_parse_round_trip_over_all_subsets(self):
        classes = list(ErrorClass)
        for size in range(1, len(classes) + 1):
            for subset in itertools.combinations(classes, size):
                rendered = render_error_classes(subset)
                assert parse_error_classes(rendered) == set(subset)
