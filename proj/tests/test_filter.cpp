#include <doctest.h>

#include "meshscape/protocol/filter.hpp"
#include "support/generators.hpp"
#include "support/match_oracle.hpp"

using namespace meshscape::protocol;
namespace mt = meshscape::testing;

namespace {

Entry entry_of(const mt::OracleEntry& attrs) {
    Entry e{Dn::parse("hn=test"), {}};
    e.add("objectclass", "GridResource");
    for (const auto& [name, values] : attrs) {
        for (const auto& v : values) e.add(name, v);
    }
    return e;
}

std::size_t syntax_offset(const std::string& text) {
    try {
        parse_filter(text);
    } catch (const SyntaxError& e) {
        return e.offset();
    }
    FAIL("expected a syntax error for " << text);
    return 0;
}

}  // namespace

TEST_CASE("parse examples") {
    CHECK(parse_filter("(objectclass=*)") == Filter::presence("objectclass"));
    CHECK(parse_filter("(&(os-name=Linux)(cpu-count>=4))") ==
          Filter::all_of({Filter::equality("os-name", "Linux"), Filter::greater_or_equal("cpu-count", "4")}));
    CHECK(parse_filter("(|(a<=3)(!(b=x)))") ==
          Filter::any_of({Filter::less_or_equal("a", "3"), Filter::negate(Filter::equality("b", "x"))}));
    CHECK(parse_filter("(cn=ab*cd*ef)") == Filter::substring("cn", "ab", {"cd"}, "ef"));
    CHECK(parse_filter("(cn=*cd*)") == Filter::substring("cn", std::nullopt, {"cd"}, std::nullopt));
    CHECK(parse_filter("(cn=ab*)") == Filter::substring("cn", "ab", {}, std::nullopt));
    CHECK(parse_filter("(cn=*ef)") == Filter::substring("cn", std::nullopt, {}, "ef"));
}

TEST_CASE("escapes decode into values") {
    CHECK(parse_filter(R"((cn=a\28b\29c\2ad\5ce))") == Filter::equality("cn", "a(b)c*d\\e"));
    CHECK(parse_filter(R"((cn=\2A))").value == "*");
    CHECK(parse_filter("(cn=é)").value == "é");
    CHECK(parse_filter("(cn=)") == Filter::equality("cn", ""));
}

TEST_CASE("attribute names are case-insensitive") {
    CHECK(parse_filter("(OS-Name=Linux)").attr == "os-name");
    CHECK(render_filter(Filter::presence("OS-Name")) == "(os-name=*)");
}

TEST_CASE("render examples") {
    CHECK(render_filter(Filter::negate(Filter::equality("country", "Australia"))) == "(!(country=Australia))");
    CHECK(render_filter(Filter::all_of({Filter::presence("a")})) == "(&(a=*))");
    CHECK(render_filter(Filter::equality("cn", "a(b)*\\")) == R"((cn=a\28b\29\2a\5c))");
    CHECK(render_filter(Filter::substring("cn", "x", {"y", "z"}, std::nullopt)) == "(cn=x*y*z*)");
}

TEST_CASE("syntax errors report offsets") {
    CHECK(syntax_offset("") == 0);
    CHECK(syntax_offset("objectclass=*") == 0);
    CHECK(syntax_offset("(a=") == 3);
    CHECK(syntax_offset("(&)") == 2);
    CHECK(syntax_offset("(|)") == 2);
    CHECK(syntax_offset("(1a=b)") == 1);
    CHECK(syntax_offset("(a=b))") == 5);
    CHECK(syntax_offset("(a=b)(c=d)") == 5);
    CHECK(syntax_offset("((a=b))") == 1);
    CHECK(syntax_offset("(a~=b)") == 2);
    CHECK(syntax_offset("(a>=*)") == 4);
    CHECK(syntax_offset("(a=b(c)") == 4);
    CHECK(syntax_offset("(a=\\2)") == 4);
    CHECK(syntax_offset("(a=\\zz)") == 4);
    CHECK(syntax_offset("(!(a=b)(c=d))") == 7);
    CHECK(syntax_offset("( a=b)") == 1);
    CHECK_THROWS_AS(parse_filter("(a=**)"), SyntaxError);
}

TEST_CASE("factories reject invalid nodes") {
    CHECK_THROWS_AS(Filter::all_of({}), std::invalid_argument);
    CHECK_THROWS_AS(Filter::any_of({}), std::invalid_argument);
    CHECK_THROWS_AS(Filter::presence("9x"), std::invalid_argument);
    CHECK_THROWS_AS(Filter::equality("", "v"), std::invalid_argument);
    CHECK_THROWS_AS(Filter::substring("a", std::nullopt, {}, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(Filter::substring("a", "", {}, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(Filter::substring("a", "x", {""}, std::nullopt), std::invalid_argument);
}

TEST_CASE("deep nesting is bounded") {
    std::string deep;
    for (int i = 0; i < 100; ++i) deep += "(!";
    deep += "(a=b)";
    for (int i = 0; i < 100; ++i) deep += ")";
    CHECK_NOTHROW(parse_filter(deep));
    std::string too_deep;
    for (int i = 0; i < 5000; ++i) too_deep += "(!";
    CHECK_THROWS_AS(parse_filter(too_deep), SyntaxError);
}

TEST_CASE("round trip over generated filters") {
    mt::Rng rng(20240301);
    int failures = 0;
    for (int i = 0; i < 1000; ++i) {
        const Filter f = mt::random_filter(rng, 4);
        const std::string text = render_filter(f);
        if (!(parse_filter(text) == f)) {
            ++failures;
            MESSAGE("round trip failed for " << text);
        }
        CHECK(render_filter(parse_filter(text)) == text);
    }
    CHECK(failures == 0);
}

TEST_CASE("match examples") {
    Entry e{Dn::parse("hn=x"), {}};
    e.add("objectclass", "GridResource");
    e.add("os-name", "Linux");
    e.add("cpu-count", "4");
    CHECK(match_entry(e, parse_filter("(os-name=linux)")));
    CHECK_FALSE(match_entry(e, parse_filter("(cpu-count>=10)")));
    CHECK(match_entry(e, parse_filter("(cpu-count>=04)")));
    CHECK(match_entry(e, parse_filter("(cpu-count<=4.0)")));
    CHECK_FALSE(match_entry(e, parse_filter("(cpu-count=04)")));
    CHECK(match_entry(e, parse_filter("(os-name=LI*)")));
    CHECK(match_entry(e, parse_filter("(os-name=*n*x)")));
    CHECK_FALSE(match_entry(e, parse_filter("(os-name=*n*n*x)")));
    CHECK_FALSE(match_entry(e, parse_filter("(missing=*)")));
    CHECK_FALSE(match_entry(e, parse_filter("(missing=x)")));
    CHECK(match_entry(e, parse_filter("(!(missing>=1))")));
    CHECK(match_entry(e, parse_filter("(os-name>=k)")));   // lexicographic
    CHECK(match_entry(e, parse_filter("(cpu-count>=10a)")));  // "4" > "10a" as text
}

TEST_CASE("substring pieces do not overlap") {
    Entry e{Dn::parse("hn=x"), {}};
    e.add("v", "aba");
    CHECK(match_entry(e, parse_filter("(v=ab*a)")));
    CHECK_FALSE(match_entry(e, parse_filter("(v=ab*ba)")));
    CHECK_FALSE(match_entry(e, parse_filter("(v=aba*a)")));
    CHECK(match_entry(e, parse_filter("(v=*b*)")));
}

TEST_CASE("multi-valued attributes match if any value does") {
    Entry e{Dn::parse("hn=x"), {}};
    e.add("load", "0.5");
    e.add("load", "7");
    CHECK(match_entry(e, parse_filter("(load>=6)")));
    CHECK(match_entry(e, parse_filter("(load<=1)")));
    CHECK(match_entry(e, parse_filter("(&(load>=6)(load<=1))")));
    CHECK_FALSE(match_entry(e, parse_filter("(load=3)")));
}

TEST_CASE("exhaustive agreement with brute-force oracle") {
    const auto entries = mt::small_domain_entries();
    const auto filters = mt::small_domain_filters();
    std::size_t cases = 0, disagreements = 0;
    for (const auto& of : filters) {
        const Filter f = parse_filter(of.text());
        for (const auto& oe : entries) {
            ++cases;
            if (match_entry(entry_of(oe), f) != mt::oracle_match(oe, of)) {
                ++disagreements;
                if (disagreements < 10) MESSAGE("disagreement on " << of.text());
            }
        }
    }
    CHECK(cases >= 10000);
    CHECK(disagreements == 0);
}

TEST_CASE("boolean laws over generated filters") {
    mt::Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        const Entry e = mt::random_entry(rng);
        const Filter f = mt::random_filter(rng, 2);
        const Filter g = mt::random_filter(rng, 2);
        CHECK(match_entry(e, Filter::negate(f)) == !match_entry(e, f));
        CHECK(match_entry(e, Filter::all_of({f, g})) == (match_entry(e, f) && match_entry(e, g)));
        CHECK(match_entry(e, Filter::any_of({f, g})) == (match_entry(e, f) || match_entry(e, g)));
    }
}

TEST_CASE("prefix substring covers every extension of the value") {
    mt::Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const std::string v = mt::random_value(rng, false);
        const std::string x = mt::random_value(rng, true);
        Entry e{Dn::parse("hn=x"), {}};
        e.add("attr", v + x);
        CHECK(match_entry(e, Filter::equality("attr", v + x)));
        CHECK(match_entry(e, Filter::substring("attr", v, {}, std::nullopt)));
    }
}
