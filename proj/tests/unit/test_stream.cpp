#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twinwatch/stream/graph.hpp"
#include "twinwatch/stream/parser.hpp"
#include "twinwatch/stream/trace.hpp"

#include "../support/generators.hpp"
#include "../support/oracle.hpp"

using namespace twinwatch;
using namespace twinwatch::stream;

namespace {

const char* kListing1 =
    "0: actualSpeed = 0\n"
    "0: expectedSpeed = 1\n"
    "2: actualSpeed = 5\n"
    "2: expectedSpeed = 1\n"
    "4: actualSpeed = 2\n"
    "4: expectedSpeed = 5\n"
    "6: actualSpeed = 3\n"
    "6: expectedSpeed = 3\n"
    "8: actualSpeed = 1\n"
    "8: expectedSpeed = 4\n";

const char* kP2Spec =
    "in actualSpeed: Events[Int]\n"
    "in expectedSpeed: Events[Int]\n"
    "def diff = expectedSpeed - actualSpeed\n"
    "out diff\n";

TimedEvent ev(Timestamp secs, std::int64_t v) { return {secs * kNanosPerSecond, Value(v)}; }

} // namespace

TEST_CASE("trace: parse single line") {
  Trace t = parse_trace("0: actualSpeed = 0");
  REQUIRE(t.size() == 1);
  CHECK(t.entries[0].stream == "actualSpeed");
  CHECK(t.entries[0].event.t == 0);
  CHECK(t.entries[0].event.value == Value(std::int64_t{0}));
}

TEST_CASE("trace: empty text") {
  CHECK(parse_trace("").empty());
  CHECK(parse_trace("\n\n  \n").empty());
}

TEST_CASE("trace: malformed line reports line number") {
  CHECK_THROWS_WITH_AS(parse_trace("2: x 5"), doctest::Contains("1:"), ParseError);
  CHECK_THROWS_AS(parse_trace("0: a = 1\nnope"), ParseError);
  try {
    parse_trace("0: a = 1\n0: b = 1\n2: c 1\n");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("trace: timestamp regression and duplicates rejected") {
  CHECK_THROWS_AS(parse_trace("2: a = 1\n1: b = 2\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("2: a = 1\n2: a = 2\n"), ParseError);
  CHECK_NOTHROW(parse_trace("2: a = 1\n2: b = 2\n"));
}

TEST_CASE("trace: format/parse round-trip") {
  Trace t;
  t.append("a", {0, Value(std::int64_t{-4})});
  t.append("b", {0, Value(true)});
  t.append("a", {1'500'000'000, Value(0.25)});
  t.append("b", {2 * kNanosPerSecond, Value(-0.0)});
  t.append("c", {2 * kNanosPerSecond, Value(1.0)});
  Trace back = parse_trace(format_trace(t));
  CHECK(back == t);
}

TEST_CASE("trace: random round-trip property") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    Trace t;
    Timestamp now = 0;
    int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      std::string name = "s" + std::to_string(rng() % 3);
      Value v;
      switch (rng() % 3) {
        case 0: v = Value(static_cast<std::int64_t>(rng()) >> (rng() % 32)); break;
        case 1: {
          std::uint64_t bits = rng();
          double d;
          std::memcpy(&d, &bits, sizeof d);
          if (std::isnan(d)) d = 1.5;
          v = Value(d);
          break;
        }
        default: v = Value(rng() % 2 == 0); break;
      }
      // keep per-stream strictly increasing: advance time every event
      now += 1 + static_cast<Timestamp>(rng() % kNanosPerSecond);
      t.append(name, {now, v});
    }
    Trace back = parse_trace(format_trace(t));
    REQUIRE(back == t);
  }
}

TEST_CASE("parse_spec: P2 shape") {
  MonitorSpec spec = parse_spec(kP2Spec);
  REQUIRE(spec.inputs.size() == 2);
  CHECK(spec.inputs[0].name == "actualSpeed");
  CHECK(spec.inputs[0].kind == ValueKind::Int);
  REQUIRE(spec.definitions.size() == 1);
  CHECK(spec.definitions[0].name == "diff");
  REQUIRE(spec.outputs.size() == 1);
  CHECK(spec.outputs[0].name == "diff");
}

TEST_CASE("parse_spec: empty program") {
  MonitorSpec spec = parse_spec("");
  CHECK(spec.inputs.empty());
  CHECK(spec.definitions.empty());
  CHECK(spec.outputs.empty());
}

TEST_CASE("parse_spec: undefined identifier") {
  CHECK_THROWS_AS(parse_spec("def x = y\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("out nothing\n"), ParseError);
  // forward references to later definitions are not allowed
  CHECK_THROWS_AS(parse_spec("def x = y\ndef y = 1\n"), ParseError);
}

TEST_CASE("parse_spec: duplicate stream name") {
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\nin a: Events[Int]\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\ndef a = 1\n"), ParseError);
}

TEST_CASE("parse_spec: kind mismatches") {
  CHECK_THROWS_AS(parse_spec("in a: Events[Bool]\ndef x = a + 1\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\ndef x = !a\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\nin b: Events[Bool]\ndef x = merge(a, b)\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\ndef x = a == true\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\ndef x = default(a, 0.5)\n"), ParseError);
  CHECK_NOTHROW(parse_spec("in a: Events[Float]\ndef x = default(a, 0)\n"));
  CHECK_NOTHROW(parse_spec("in a: Events[Int]\nin b: Events[Float]\ndef x = merge(a, b)\n"));
}

TEST_CASE("parse_spec: syntax errors carry positions") {
  try {
    parse_spec("in a: Events[Int]\ndef x = (a +\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() >= 2);
  }
  CHECK_THROWS_AS(parse_spec("in a: Events[Nope]\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("banana\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\ndef x = min(a)\n"), ParseError);
}

TEST_CASE("parse_spec: annotations bind to following declaration") {
  MonitorSpec spec = parse_spec(
      "@TelegrafIn(\"robot\", \"speed\", \"actualSpeed\")\n"
      "in actualSpeed: Events[Float]\n"
      "def ok = actualSpeed < 0.22\n"
      "@TelegrafOut(\"ok\")\n"
      "out ok\n");
  REQUIRE(spec.inputs.size() == 1);
  REQUIRE(spec.inputs[0].annotation.has_value());
  CHECK(spec.inputs[0].annotation->id == "robot");
  CHECK(spec.inputs[0].annotation->tags == "speed");
  CHECK(spec.inputs[0].annotation->field == "actualSpeed");
  REQUIRE(spec.outputs.size() == 1);
  REQUIRE(spec.outputs[0].annotation.has_value());
  CHECK(spec.outputs[0].annotation->name == "ok");
}

TEST_CASE("parse_spec: misplaced annotations") {
  CHECK_THROWS_AS(parse_spec("@TelegrafIn(\"a\",\"b\",\"c\")\nout x\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("@TelegrafOut(\"x\")\nin x: Events[Int]\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\n@TelegrafIn(\"a\",\"b\")\nin b: Events[Int]\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("@Unknown(\"a\")\nin a: Events[Int]\n"), ParseError);
  CHECK_THROWS_AS(parse_spec("in a: Events[Int]\n@TelegrafOut(\"x\")\n"), ParseError);
}

TEST_CASE("compile: P2 graph shape") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  int inputs = 0, subs = 0;
  for (const auto& n : g.nodes()) {
    if (n.op == OpCode::Input) ++inputs;
    if (n.op == OpCode::Sub) ++subs;
  }
  CHECK(inputs == 2);
  CHECK(subs == 1);
  CHECK(g.outputs().size() == 1);
}

TEST_CASE("compile: cycle through last is accepted") {
  CHECK_NOTHROW(compile(parse_spec("in b: Events[Int]\ndef a = last(a, b)\n")));
  // the canonical event counter
  CHECK_NOTHROW(compile(parse_spec("in tick: Events[Int]\ndef count = default(last(count, tick) + 1, 0)\nout count\n")));
}

TEST_CASE("compile: illegal cycle rejected") {
  CHECK_THROWS_AS(compile(parse_spec("def a = a + 1\n")), CompileError);
  CHECK_THROWS_AS(compile(parse_spec("in b: Events[Int]\ndef a = merge(a, b)\n")), CompileError);
}

TEST_CASE("push_event: signal lift with partial knowledge") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  auto out1 = g.push("actualSpeed", ev(0, 0));
  CHECK(out1.empty());
  auto out2 = g.push("expectedSpeed", ev(0, 1));
  CHECK(out2.empty()); // same instant still open
  auto out3 = g.flush();
  REQUIRE(out3.size() == 1);
  CHECK(out3[0].first == "diff");
  CHECK(out3[0].second == TimedEvent{0, Value(std::int64_t{1})});
}

TEST_CASE("push_event: outputs of an instant are finalized when time advances") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  (void)g.push("actualSpeed", ev(0, 0));
  (void)g.push("expectedSpeed", ev(0, 1));
  auto out = g.push("actualSpeed", ev(2, 5));
  REQUIRE(out.size() == 1); // t=0 closed by the t=2 push
  CHECK(out[0].second == TimedEvent{0, Value(std::int64_t{1})});
  (void)g.push("expectedSpeed", ev(2, 1));
  auto fin = g.flush();
  REQUIRE(fin.size() == 1);
  CHECK(fin[0].second == TimedEvent{2 * kNanosPerSecond, Value(std::int64_t{-4})});
}

TEST_CASE("push_event: event on stream with no dependents") {
  MonitorGraph g = compile(parse_spec("in a: Events[Int]\nin b: Events[Int]\ndef x = b + 1\nout x\n"));
  (void)g.push("a", ev(0, 7));
  CHECK(g.flush().empty());
}

TEST_CASE("push_event: unknown stream and timestamp regression") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  CHECK_THROWS_AS((void)g.push("nope", ev(0, 1)), EvalError);
  (void)g.push("actualSpeed", ev(2, 1));
  CHECK_THROWS_AS((void)g.push("expectedSpeed", ev(1, 1)), EvalError);
  CHECK_THROWS_AS((void)g.push("actualSpeed", ev(2, 2)), EvalError); // duplicate in open instant
  (void)g.flush();
  CHECK_THROWS_AS((void)g.push("expectedSpeed", ev(2, 1)), EvalError); // instant already closed
}

TEST_CASE("push_event: kind checks at the boundary") {
  MonitorGraph g = compile(parse_spec("in a: Events[Int]\nin f: Events[Float]\nout a\nout f\n"));
  CHECK_THROWS_AS((void)g.push("a", {0, Value(0.5)}), EvalError);
  CHECK_THROWS_AS((void)g.push("a", {0, Value(true)}), EvalError);
  (void)g.push("f", {0, Value(std::int64_t{1})}); // Int widens into Float streams
  auto out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(1.0));
}

TEST_CASE("merge: left bias on simultaneous events") {
  MonitorGraph g = compile(parse_spec("in a: Events[Int]\nin b: Events[Int]\ndef m = merge(a, b)\nout m\n"));
  (void)g.push("a", ev(1, 10));
  (void)g.push("b", ev(1, 20));
  auto out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{10}));
  // b alone still passes through
  (void)g.push("b", ev(2, 30));
  out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{30}));
}

TEST_CASE("default: seeds the first instant") {
  MonitorGraph g = compile(parse_spec(
      "in x: Events[Int]\nin y: Events[Int]\ndef d = default(y, 42) + x\nout d\n"));
  (void)g.push("x", ev(0, 1));
  auto out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{43}));
  // later x events keep using the seed until y first fires
  (void)g.push("x", ev(1, 2));
  out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{44}));
  (void)g.push("y", ev(2, 100));
  out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{102}));
}

TEST_CASE("last: previous value at each trigger") {
  MonitorGraph g = compile(parse_spec(
      "in v: Events[Int]\nin t: Events[Int]\ndef l = last(v, t)\nout l\n"));
  (void)g.push("v", ev(0, 1));
  (void)g.push("t", ev(0, 0));
  CHECK(g.flush().empty()); // nothing strictly before the first instant
  (void)g.push("t", ev(1, 0));
  auto out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{1}));
  // simultaneous v update is not yet visible to last
  (void)g.push("v", ev(2, 7));
  (void)g.push("t", ev(2, 0));
  out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{1}));
  (void)g.push("t", ev(3, 0));
  out = g.flush();
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.value == Value(std::int64_t{7}));
}

TEST_CASE("counter idiom") {
  MonitorGraph g = compile(parse_spec(
      "in tick: Events[Int]\ndef count = default(last(count, tick) + 1, 0)\nout count\n"));
  std::vector<std::int64_t> seen;
  for (int i = 0; i < 4; ++i) {
    (void)g.push("tick", ev(i, 0));
    auto out = g.flush();
    REQUIRE(out.size() == 1);
    seen.push_back(out[0].second.value.as_int());
  }
  CHECK(seen == std::vector<std::int64_t>{0, 1, 2, 3});
}

TEST_CASE("run_trace: Listing 1 diff sequence") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  Trace out = g.run_trace(parse_trace(kListing1));
  auto diffs = out.events_of("diff");
  REQUIRE(diffs.size() == 5);
  const std::pair<Timestamp, std::int64_t> expected[] = {{0, 1}, {2, -4}, {4, 3}, {6, 0}, {8, 3}};
  for (int i = 0; i < 5; ++i) {
    CHECK(diffs[i].t == expected[i].first * kNanosPerSecond);
    CHECK(diffs[i].value == Value(expected[i].second));
  }
}

TEST_CASE("run_trace: violation stream with tolerance 2") {
  MonitorGraph g = compile(parse_spec(
      "in actualSpeed: Events[Int]\n"
      "in expectedSpeed: Events[Int]\n"
      "def diff = expectedSpeed - actualSpeed\n"
      "def violation = abs(diff) > 2\n"
      "out diff\nout violation\n"));
  Trace out = g.run_trace(parse_trace(kListing1));
  auto v = out.events_of("violation");
  REQUIRE(v.size() == 5);
  const bool expected[] = {false, true, true, false, true};
  for (int i = 0; i < 5; ++i) CHECK(v[i].value == Value(expected[i]));
}

TEST_CASE("run_trace: empty trace") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  CHECK(g.run_trace(Trace{}).empty());
}

TEST_CASE("run_trace: deterministic byte-for-byte") {
  MonitorGraph g = compile(parse_spec(
      "in a: Events[Float]\nin b: Events[Float]\n"
      "def x = (a * 3.5 - b) / merge(a, b)\nout x\n"));
  Trace t = parse_trace("0: a = 1.25\n1: b = 0.5\n2: a = -7.75\n2: b = 2.0\n");
  std::string first = format_trace(g.run_trace(t));
  for (int i = 0; i < 5; ++i) CHECK(format_trace(g.run_trace(t)) == first);
}

TEST_CASE("output timestamps are a subset of input timestamps") {
  testing::SpecGen gen(99);
  for (int iter = 0; iter < 50; ++iter) {
    MonitorSpec spec = parse_spec(gen.source());
    MonitorGraph g = compile(spec);
    Trace in = gen.trace();
    Trace out = g.run_trace(in);
    std::set<Timestamp> input_ts;
    for (const auto& e : in.entries) input_ts.insert(e.event.t);
    for (const auto& e : out.entries) CHECK(input_ts.count(e.event.t) == 1);
  }
}

TEST_CASE("incremental engine matches the full-recompute oracle") {
  testing::SpecGen gen(2024);
  for (int iter = 0; iter < 150; ++iter) {
    std::string src = gen.source();
    CAPTURE(src);
    MonitorSpec spec = parse_spec(src);
    MonitorGraph g = compile(spec);
    Trace in = gen.trace();
    CAPTURE(format_trace(in));
    Trace incremental = g.run_trace(in);
    Trace reference = testing::oracle_run(spec, in);
    REQUIRE(incremental == reference);
  }
}

TEST_CASE("parse_spec: line comments") {
  MonitorSpec spec = parse_spec(
      "# hash comment\n"
      "in a: Events[Int] -- trailing note\n"
      "-- full-line note\n"
      "def b = a + 1\n"
      "out b\n");
  CHECK(spec.inputs.size() == 1);
  CHECK(spec.definitions.size() == 1);
}

TEST_CASE("graph copies evaluate independently") {
  MonitorGraph g = compile(parse_spec(kP2Spec));
  (void)g.push("actualSpeed", ev(0, 0));
  (void)g.push("expectedSpeed", ev(0, 1));
  MonitorGraph h = g; // state carried over
  auto out_g = g.flush();
  REQUIRE(out_g.size() == 1);
  // the copy still has the instant open and can diverge on its own
  auto closed = h.push("actualSpeed", ev(1, 2)); // closes t=0
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].second == TimedEvent{0, Value(std::int64_t{1})});
  auto later = h.flush();
  REQUIRE(later.size() == 1);
  CHECK(later[0].second == TimedEvent{1 * kNanosPerSecond, Value(std::int64_t{-1})});
  // the original is unaffected by the copy's pushes
  CHECK_THROWS_AS((void)g.push("actualSpeed", ev(0, 9)), EvalError);
}

TEST_CASE("mixed Int/Float kinds promote through merge, if and default") {
  MonitorGraph g = compile(parse_spec(
      "in a: Events[Int]\n"
      "in f: Events[Float]\n"
      "in c: Events[Bool]\n"
      "def m = merge(a, f)\n"
      "def pick = if c then a else f\n"
      "def seeded = default(f, 7)\n"
      "out m\nout pick\nout seeded\n"));
  // t=0: only the Int side ticks; merge and default must come out Float-kinded
  (void)g.push("a", ev(0, 3));
  (void)g.push("c", {0, Value(true)});
  auto out = g.flush();
  REQUIRE(out.size() == 2); // m and seeded fire; pick lacks f
  CHECK(out[0].first == "m");
  CHECK(out[0].second.value == Value(3.0));
  CHECK(out[1].first == "seeded");
  CHECK(out[1].second.value == Value(7.0));
  // t=1: the Float side arrives; pick routes the Int branch as Float
  (void)g.push("f", {kNanosPerSecond, Value(0.5)});
  out = g.flush();
  REQUIRE(out.size() == 3);
  CHECK(out[0].second.value == Value(0.5));           // m prefers... only f ticked
  CHECK(out[1].second.value == Value(3.0));           // pick: c=true -> a promoted
  CHECK(out[2].second.value == Value(0.5));           // seeded follows f now
}

TEST_CASE("parser robustness: garbage input throws, never crashes") {
  std::mt19937_64 rng(404);
  const std::string alphabet =
      "abcdefin out=+-*/<>!&|()[]{}.,:@\"0123456789 \nEventsIntFloatBool";
  for (int iter = 0; iter < 2000; ++iter) {
    std::string text;
    int len = static_cast<int>(rng() % 120);
    for (int i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
    try {
      (void)parse_spec(text);
    } catch (const ParseError&) {
      // expected for most inputs
    }
    try {
      (void)parse_trace(text);
    } catch (const ParseError&) {
    }
  }
  // mutated versions of a valid program
  const std::string valid = "in a: Events[Int]\ndef b = abs(a) + 1\nout b\n";
  for (int iter = 0; iter < 2000; ++iter) {
    std::string text = valid;
    int n_mut = 1 + static_cast<int>(rng() % 3);
    for (int m = 0; m < n_mut; ++m) {
      std::size_t pos = rng() % text.size();
      switch (rng() % 3) {
        case 0: text[pos] = alphabet[rng() % alphabet.size()]; break;
        case 1: text.erase(pos, 1); break;
        default: text.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
      }
    }
    try {
      auto spec = parse_spec(text);
      (void)compile(spec); // well-formed mutants must still compile cleanly
    } catch (const Error&) {
    }
  }
}
