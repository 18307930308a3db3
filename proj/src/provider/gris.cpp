#include "meshscape/provider/gris.hpp"

namespace meshscape::provider {

using protocol::Dn;
using protocol::Entry;
using protocol::Scope;

GrisState GrisState::at_tick(const ResourceProfile& profile, std::uint64_t tick) {
    DynamicState state(profile);
    state.advance(tick);
    return from(profile, state);
}

GrisState GrisState::from(const ResourceProfile& profile, const DynamicState& state) {
    return GrisState{profile, state.tick(), build_tree(profile, state)};
}

SearchOutcome search_entries(std::span<const Entry> tree, const protocol::SearchRequest& request) {
    SearchOutcome out;
    if (tree.empty()) {
        out.code = protocol::result_code::kNoSuchObject;
        out.diagnostic = "empty directory";
        return out;
    }
    const Dn& base = request.base.empty() ? tree.front().dn : request.base;
    const bool base_exists =
        std::any_of(tree.begin(), tree.end(), [&](const Entry& e) { return e.dn.same_as(base); });
    if (!base_exists) {
        out.code = protocol::result_code::kNoSuchObject;
        out.diagnostic = "no such base: " + base.str();
        return out;
    }
    for (const Entry& e : tree) {
        bool in_scope = false;
        switch (request.scope) {
            case Scope::Base:
                in_scope = e.dn.same_as(base);
                break;
            case Scope::One:
                in_scope = e.dn.depth() == base.depth() + 1 && e.dn.is_descendant_of(base);
                break;
            case Scope::Sub:
                in_scope = e.dn.same_as(base) || e.dn.is_descendant_of(base);
                break;
        }
        if (in_scope && protocol::match_entry(e, request.filter)) {
            out.entries.push_back(protocol::project(e, request.attrs));
        }
    }
    return out;
}

}  // namespace meshscape::provider
