#pragma once

// Hand-traced 132-slot feature vectors for the two golden fixture packages.
// Each value was derived slot by slot from the feature definitions (GL4
// entropies computed from the character-class frequencies, counts tallied by
// hand over the fixture file contents) and cross-checked with an independent
// calculation before being frozen here.

#include <array>

namespace golden {

// package/package.json {"name":"left-pad",...,"scripts":{"test":...}}
// package/index.js     3 lines, 9 words, 1 '=' of 73 bytes, no strings,
//                      identifiers: module exports function pad s n return
//                      String s padStart n (9 homogeneous + String, padStart)
// package/README.md
inline constexpr std::array<double, 132> kBenignVector = {
    0.0, 2.0, 1.0, 9.0,
    3.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.10850789680435913,
    0.23129631766092093, 0.0, 0.6500224216483541, 9.0,
    2.0, 0.3092196370432313, 0.3763393267283279, 0.5967934324239752,
    0.9709505944546686, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0136986301369863, 0.0, 0.0136986301369863,
    0.0136986301369863, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
};

// package/package.json preinstall hook -> has_install_hook = 1
// package/run.js       base64 payload (os.system embedded -> 1 dictionary
//                      hit via the shifted base64 variant), "child_process"
//                      plaintext hit, one URL, one IPv4, 3 '=' of 112 bytes
// package/setup.sh     shell script: census only
inline constexpr std::array<double, 132> kMalVector = {
    1.0, 2.0, 1.0, 8.0,
    2.0, 1.0, 1.0, 2.0,
    1.0, 1.2240288300586064, 0.6112119224363234, 1.6404214632732819,
    1.8409745639875459, 0.0, 3.0, 0.0,
    0.0, 0.0, 0.0, 4.0,
    0.0, 0.3140790676133295, 0.3809004964224834, 0.613801439419319,
    0.9709505944546686, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.026785714285714284, 0.0, 0.026785714285714284,
    0.026785714285714284, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    1.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0,
};

}  // namespace golden
