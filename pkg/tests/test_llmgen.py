import asyncio

import pytest

import app.core.llm as llm
from app.core.errors import BackendError, ConfigurationError, TemplateError
from app.database.datastore import read_error_log
from app.llmgen.backends import IDK_ANSWER, UNANSWERABLE, HttpChatBackend, call_backend, mock_backend
from app.llmgen.parsing import (
    clean_answer,
    is_no_questions,
    parse_edp_tuples,
    parse_option_index,
    parse_speculated_questions,
    serialize_edp_tuples,
)
from app.llmgen.templates import (
    EXCERPT_SLOT,
    QUESTION_SLOT,
    QUESTIONS_SLOT,
    all_templates,
    get_template,
    identify_prompt,
    render_prompt,
)
from app.llmgen.utils import (
    TranscriptLog,
    answer_question,
    compress_answer,
    extract_edps,
    speculate_questions,
)
from app.text.schemas import Chunk
from app.text.utils import count_tokens

CHUNK = Chunk(
    doc_id="saltmere",
    chunk_index=0,
    text="The lighthouse on Marrow Point is painted crimson. Agnes keeps a logbook. Storms cut the village off.",
    token_count=20,
    sentence_range=(0, 2),
)


def run(coro):
    return asyncio.run(coro)


class TestTemplates:
    def test_every_template_loads(self):
        templates = all_templates()
        assert len(templates) == 10
        assert all(t.slots for t in templates)

    def test_slots(self):
        assert get_template("kb_narrative").slots == [EXCERPT_SLOT, QUESTIONS_SLOT]
        assert get_template("kb_narrative_fact_only").slots == [EXCERPT_SLOT]

    def test_missing_and_extra_bindings(self):
        template = get_template("kb_qasper")
        with pytest.raises(TemplateError) as missing:
            render_prompt(template, {EXCERPT_SLOT: "text"})
        assert missing.value.missing == [QUESTIONS_SLOT]
        with pytest.raises(TemplateError) as extra:
            render_prompt(template, {EXCERPT_SLOT: "a", QUESTIONS_SLOT: "b", QUESTION_SLOT: "c"})
        assert extra.value.extra == [QUESTION_SLOT]

    def test_kb_narrative_render(self):
        system, user = render_prompt(
            get_template("kb_narrative"),
            {EXCERPT_SLOT: "Agnes keeps the lamp.", QUESTIONS_SLOT: "- Who keeps the lamp?"},
        )
        assert system == "You are a helpful assistant."
        assert "Passage:\nAgnes keeps the lamp." in user
        assert "Questions:\n- Who keeps the lamp?" in user
        assert "[INSERT" not in user
        assert "(Visitor, A friend visits the philosopher)" in user

    def test_system_halves_are_not_empty(self):
        assert all(t.system_text.strip() for t in all_templates())

    def test_bound_values_are_not_rescanned(self):
        template = get_template("spec_narrative")
        _, user = render_prompt(template, {EXCERPT_SLOT: "literal [INSERT QUESTION HERE] text"})
        assert "literal [INSERT QUESTION HERE] text" in user

    def test_identify_recovers_bindings(self):
        template = get_template("kb_qasper")
        bindings = {EXCERPT_SLOT: "Some passage.\nWith lines.", QUESTIONS_SLOT: "- Why?"}
        system, user = render_prompt(template, bindings)
        found, recovered = identify_prompt(system, user)
        assert found.template_id == "kb_qasper"
        assert recovered == bindings

    def test_identify_unknown_prompt(self):
        assert identify_prompt("system", "user") is None


class TestEdpParsing:
    def test_basic_tuples(self):
        tuples, malformed = parse_edp_tuples("(Ada Lovelace, wrote the first program), (Engine, designed by Babbage)")
        assert [(t.entity_text, t.description_text) for t in tuples] == [
            ("Ada Lovelace", "wrote the first program"),
            ("Engine", "designed by Babbage"),
        ]
        assert malformed == 0

    def test_split_on_first_unquoted_comma(self):
        tuples, _ = parse_edp_tuples('("Smith, John", born in York, 1900)')
        assert tuples[0].entity_text == "Smith, John"
        assert tuples[0].description_text == "born in York, 1900"

    def test_nested_parentheses_in_description(self):
        tuples, malformed = parse_edp_tuples("(Engine, a machine (never finished))")
        assert tuples[0].description_text == "a machine (never finished)"
        assert malformed == 0

    def test_source_offsets(self):
        completion = "x (A, b)"
        tuples, _ = parse_edp_tuples(completion)
        start, end = tuples[0].source_offset
        assert completion[start:end] == "(A, b)"

    def test_unclosed_tuple(self):
        tuples, malformed = parse_edp_tuples("(A, b), (C, d")
        assert len(tuples) == 1
        assert malformed == 1

    def test_malformed_fixture(self):
        kinds = ["(no comma {i})", "(, empty entity {i})", "(entity {i},)", "stray fragment {i}"]
        pieces = []
        for i in range(50):
            if i % 2 == 0:
                pieces.append(f"(Entity {i}, description {i})")
            else:
                pieces.append(kinds[(i // 2) % len(kinds)].format(i=i))
        tuples, malformed = parse_edp_tuples(", ".join(pieces))
        assert len(tuples) == 25
        assert malformed == 25
        assert tuples[3].entity_text == "Entity 6"

    def test_serialize_then_parse(self):
        pairs = [("Smith, John", "a clerk"), ("York", "a city, in England")]
        tuples, malformed = parse_edp_tuples(serialize_edp_tuples(pairs))
        assert [(t.entity_text, t.description_text) for t in tuples] == pairs
        assert malformed == 0

    @pytest.mark.parametrize(
        "pairs",
        [
            [("Quote", 'He said "hi'), ("B", "c")],
            [('The "Bard"', "wrote plays, sonnets"), ("Hamlet", '"Hamlet"')],
            [('Motto, "Semper"', 'written as "Semper, Fidelis" on the gate')],
        ],
    )
    def test_serialize_then_parse_with_quotes(self, pairs):
        tuples, malformed = parse_edp_tuples(serialize_edp_tuples(pairs))
        assert [(t.entity_text, t.description_text) for t in tuples] == pairs
        assert malformed == 0

    def test_quote_inside_description(self):
        tuples, malformed = parse_edp_tuples('(Alan Turing, He wrote "On Computable Numbers), (B, c)')
        assert [(t.entity_text, t.description_text) for t in tuples] == [
            ("Alan Turing", 'He wrote "On Computable Numbers'),
            ("B", "c"),
        ]
        assert malformed == 0

    def test_unterminated_opening_quote(self):
        tuples, malformed = parse_edp_tuples('(A, "On Computable Numbers" was his paper), (B, c)')
        assert [t.description_text for t in tuples] == ['"On Computable Numbers" was his paper', "c"]
        assert malformed == 0

    def test_philosopher_example(self):
        completion = (
            "(Visitor, A friend visits the philosopher), "
            "(Philosopher's stance on law, Breaking the law is equivalent to betraying a contract with the state)"
        )
        tuples, malformed = parse_edp_tuples(completion)
        assert [(t.entity_text, t.description_text) for t in tuples] == [
            ("Visitor", "A friend visits the philosopher"),
            ("Philosopher's stance on law", "Breaking the law is equivalent to betraying a contract with the state"),
        ]
        assert malformed == 0

    def test_turing_round_trip(self):
        pairs = [
            (
                "Alan Turing's contributions",
                "Pioneered modern computing, laid the foundation for artificial intelligence",
            )
        ]
        tuples, malformed = parse_edp_tuples(serialize_edp_tuples(pairs))
        assert [(t.entity_text, t.description_text) for t in tuples] == pairs
        assert malformed == 0

    def test_lone_open_paren(self):
        tuples, malformed = parse_edp_tuples("(broken")
        assert tuples == []
        assert malformed == 1


class TestQuestionParsing:
    def test_numbered_and_compound(self):
        completion = "1. Who is Ada?\n2. What did she build? And also why?\n"
        assert parse_speculated_questions(completion) == ["Who is Ada?", "What did she build?", "Why?"]

    def test_header_and_bold(self):
        completion = "Here are the questions:\n- **Who keeps the logbook?**\n* Where is the point?"
        assert parse_speculated_questions(completion) == ["Who keeps the logbook?", "Where is the point?"]

    def test_sentinel(self):
        assert parse_speculated_questions("no questions extracted.") == []
        assert is_no_questions("**No questions extracted.**")
        assert not is_no_questions("- Who?")

    def test_great_peace_list(self):
        completion = (
            "- Where is the Great Peace expected?\n\n"
            "- Who has expressed the vision of the Great Peace?\n\n"
            "- What does 'planetization of mankind' mean?\n\n"
            "- How does the text describe the current world state?\n\n"
            "- What critical choice is presented?\n"
        )
        questions = parse_speculated_questions(completion)
        assert len(questions) == 5
        assert questions[0] == "Where is the Great Peace expected?"
        assert questions[2] == "What does 'planetization of mankind' mean?"

    def test_seed_lexicon_list(self):
        completion = (
            "1. What is the seed lexicon?\n\n"
            "2. How are relations used to propagate polarity?\n\n"
            "3. How does their model learn using mostly raw data?\n\n"
            "4. How big is the Japanese data?\n\n"
            "5. How large is the raw corpus used for training?\n\n"
            "6. How big is the seed lexicon used for training?\n\n"
            "7. What are the results?\n"
        )
        questions = parse_speculated_questions(completion)
        assert len(questions) == 7
        assert questions[0] == "What is the seed lexicon?"
        assert questions[5] == "How big is the seed lexicon used for training?"

    def test_question_answer_tuples(self):
        completion = (
            "(What is the seed lexicon?, A vocabulary of positive and negative predicates that helps "
            "determine the polarity score of an event.)\n\n"
            "(How big is the Japanese data?, 7,000,000 pairs of events were extracted from the Japanese Web corpus.)\n\n"
            '(How does the proposed method compare?, "Compared to existing methods, the approach '
            "'achieves a 15% increase in classification accuracy.'\")"
        )
        tuples, malformed = parse_edp_tuples(completion)
        assert malformed == 0
        assert [t.entity_text for t in tuples] == [
            "What is the seed lexicon?",
            "How big is the Japanese data?",
            "How does the proposed method compare?",
        ]
        assert tuples[1].description_text.startswith("7,000,000 pairs")
        assert tuples[2].description_text == (
            "Compared to existing methods, the approach 'achieves a 15% increase in classification accuracy.'"
        )

    def test_unbulleted_prose_is_ignored(self):
        assert parse_speculated_questions("I cannot help with that") == []


class TestAnswerParsing:
    @pytest.mark.parametrize(
        "completion, expected",
        [("3", 3), ("Option 2.", 2), ("**4**", 4), (" 1) ", 1), ("5", None), ("The answer is 2", None), ("", None)],
    )
    def test_option_index(self, completion, expected):
        assert parse_option_index(completion) == expected

    def test_clean_answer(self):
        assert clean_answer("Answer: Paris\nBecause it is the capital.") == "Paris"
        assert clean_answer('"Paris"') == "Paris"
        assert clean_answer("**Shortened Answer:** Paris") == "Paris"


class FlakyBackend:
    name = "flaky"
    deterministic = True

    def __init__(self, failures, error):
        self.failures = failures
        self.error = error
        self.calls = 0

    async def complete(self, system, user, seed):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.error
        return "ok"


class TestCallBackend:
    def test_retries_then_succeeds(self):
        backend = FlakyBackend(2, RuntimeError("boom"))
        assert run(call_backend(backend, "s", "u", 1, base_delay=0)) == "ok"
        assert backend.calls == 3

    def test_gives_up_after_attempts(self):
        backend = FlakyBackend(5, BackendError("rate limited"))
        with pytest.raises(BackendError) as error:
            run(call_backend(backend, "s", "u", 1, base_delay=0))
        assert error.value.attempts == 3
        assert backend.calls == 3

    def test_non_retryable_fails_at_once(self):
        backend = FlakyBackend(5, BackendError("bad request", retryable=False))
        with pytest.raises(BackendError) as error:
            run(call_backend(backend, "s", "u", 1, base_delay=0))
        assert error.value.attempts == 1
        assert backend.calls == 1


class TestHttpBackend:
    def test_missing_api_key(self, workdir, monkeypatch):
        monkeypatch.setattr(llm, "client", None)
        monkeypatch.delenv("FADER_TEST_API_KEY", raising=False)
        backend = HttpChatBackend(model="m", base_url="http://localhost:1/v1", api_key_env="FADER_TEST_API_KEY")
        with pytest.raises(ConfigurationError):
            run(backend.complete("system", "user", 1))
        assert [e["location"] for e in read_error_log()] == ["core/llm.py"]

    def test_client_is_reused(self, monkeypatch):
        monkeypatch.setattr(llm, "client", None)
        monkeypatch.setenv("FADER_TEST_API_KEY", "sk-test")
        first = run(llm.get_openai_client("http://localhost:1/v1", "FADER_TEST_API_KEY"))
        assert run(llm.get_openai_client()) is first


class TestMockPipelineSteps:
    def test_speculation_one_question_per_sentence(self):
        questions = run(speculate_questions(CHUNK, mock_backend(0), "spec_narrative", sample_run=1))
        assert [q.question_text for q in questions] == [
            "What does the passage say about lighthouse?",
            "What does the passage say about agnes?",
            "What does the passage say about storms?",
        ]
        assert all(q.sample_run == 1 and q.doc_id == "saltmere" for q in questions)

    def test_extraction_runs_overlap_and_cover(self):
        backend = mock_backend(0)
        by_run = {}
        for sample_run in (1, 2, 3):
            edps, malformed = run(extract_edps(CHUNK, None, backend, "kb_narrative_fact_only", sample_run))
            assert malformed == 0
            assert len(edps) == 2
            by_run[sample_run] = {e.edp_id for e in edps}
        assert by_run[1] != by_run[2]
        assert len(by_run[1] | by_run[2] | by_run[3]) == 3

    def test_extraction_is_deterministic(self):
        questions = run(speculate_questions(CHUNK, mock_backend(3), "spec_qasper", sample_run=2))
        first = run(extract_edps(CHUNK, questions, mock_backend(3), "kb_qasper", 2))
        second = run(extract_edps(CHUNK, questions, mock_backend(3), "kb_qasper", 2))
        assert first == second
        entity_texts = [e.entity for e in first[0]]
        assert all(len(entity.split()) <= 4 for entity in entity_texts)

    def test_answer_from_best_sentence(self):
        context = "- The lighthouse on Marrow Point is painted crimson.\n- Agnes keeps a logbook."
        answer = run(
            answer_question("What color is the lighthouse on Marrow Point?", context, mock_backend(0), "qa_qasper")
        )
        assert answer == "painted crimson."

    def test_answer_without_context(self):
        assert run(answer_question("Who?", "", mock_backend(0), "qa_qasper")) == UNANSWERABLE
        assert run(answer_question("Who?", "", mock_backend(0), "qa_narrative_r1")) == IDK_ANSWER

    def test_compress(self):
        backend = mock_backend(0)
        shortened = run(compress_answer("What color is the lighthouse?", "The lighthouse is painted crimson today", backend))
        assert shortened == "painted crimson today."
        assert run(compress_answer("Who?", IDK_ANSWER, backend)) == "I don't know."
        assert run(compress_answer("Where is it?", "Paris", backend)) == "Paris"
        assert run(compress_answer("Where is it?", "I don't know", backend)) == "I don't know"

    @pytest.mark.parametrize(
        "round1",
        [
            "Paris",
            "I don't know",
            IDK_ANSWER,
            "The lighthouse is painted crimson today",
            "Where",
            "It is in the old harbour near the north pier of the town",
        ],
    )
    def test_compress_never_lengthens(self, round1):
        shortened = run(compress_answer("Where is it?", round1, mock_backend(0)))
        assert count_tokens(shortened) <= count_tokens(round1)

    def test_multiple_choice_overlap(self):
        options = ["blue", "crimson paint", "green", "white"]
        completion = run(
            answer_question("What color?", "- The lighthouse is crimson.", mock_backend(0), "qa_quality", options=options)
        )
        assert parse_option_index(completion) == 2

    def test_random_choice_is_near_uniform(self):
        backend = mock_backend(11)
        options = ["option one", "option two", "option three", "option four"]

        async def choose_all():
            return await asyncio.gather(
                *(
                    answer_question(f"Question number {i}?", "- nothing relevant", backend, "qa_quality", options=options)
                    for i in range(400)
                )
            )

        predictions = [parse_option_index(c) for c in run(choose_all())]
        correct = sum(1 for i, p in enumerate(predictions) if p == 1 + i % 4)
        assert abs(correct / 400 - 0.25) <= 0.07

    def test_transcripts_sorted(self, tmp_path):
        transcript = TranscriptLog()
        for sample_run in (2, 1):
            run(speculate_questions(CHUNK, mock_backend(0), "spec_narrative", sample_run, transcript=transcript))
        path = tmp_path / "transcript.jsonl"
        assert transcript.write(path) == 2
        lines = path.read_text().splitlines()
        assert '"sample_run": 1' in lines[0]
