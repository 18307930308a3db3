#include <doctest.h>

#include "meshscape/protocol/entry.hpp"
#include "support/generators.hpp"

using namespace meshscape::protocol;
namespace mt = meshscape::testing;

TEST_CASE("canonical text form") {
    const Dn dn = Dn::parse("Category=load,HN=node1.example.org ,  o=grid");
    CHECK(dn.str() == "category=load, hn=node1.example.org , o=grid");
    CHECK(Dn::parse("hn=a, o=grid").str() == "hn=a, o=grid");
    CHECK(Dn::parse("").empty());
    CHECK(Dn::parse("").str().empty());
}

TEST_CASE("escaped values") {
    const Dn dn({{"cn", "a,b=c\\d"}, {"o", " lead"}});
    CHECK(dn.str() == R"(cn=a\,b\=c\\d, o=\ lead)");
    CHECK(Dn::parse(dn.str()) == dn);
}

TEST_CASE("round trip over generated dns") {
    mt::Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const Dn dn = mt::random_dn(rng);
        CHECK(Dn::parse(dn.str()) == dn);
    }
}

TEST_CASE("malformed dns") {
    for (const char* bad : {"=x", "hn", "hn=a,", "1hn=a", "hn=a,,o=b", "hn=a\\"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(Dn::parse(bad), DnError);
    }
}

TEST_CASE("hierarchy") {
    const Dn root = Dn::parse("hn=x, o=grid");
    const Dn child = root.child("category", "cpu");
    CHECK(child.str() == "category=cpu, hn=x, o=grid");
    CHECK(child.parent() == root);
    CHECK(child.is_descendant_of(root));
    CHECK_FALSE(root.is_descendant_of(root));
    CHECK_FALSE(root.is_descendant_of(child));
    CHECK(Dn::parse("HN=X, o=GRID").same_as(root));
    CHECK(child.depth() == 3);
}

TEST_CASE("entry attributes are lowercased and projected") {
    Entry e{Dn::parse("hn=x"), {}};
    e.add("ObjectClass", "GridResource");
    e.add("OS-Name", "Linux");
    e.add("os-name", "Other");
    e.add("cpu-count", "2");
    REQUIRE(e.find("OS-NAME"));
    CHECK(*e.find("os-name") == std::vector<std::string>{"Linux", "Other"});
    const Entry p = project(e, {"OS-Name"});
    CHECK(p.dn == e.dn);
    CHECK(p.attributes.size() == 2);
    CHECK(p.find("objectclass"));
    CHECK_FALSE(p.find("cpu-count"));
    CHECK(project(e, {}) == e);
}
