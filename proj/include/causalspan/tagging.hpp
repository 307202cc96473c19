#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "causalspan/corpus.hpp"

namespace causalspan {

enum class Scheme { Bio, Iobes };

Scheme scheme_from_string(std::string_view name);
const char* scheme_to_string(Scheme scheme);

/// Size of the tag alphabet: 5 for BIO, 9 for IOBES.
int tag_alphabet_size(Scheme scheme);

/// A per-token label. prefix is one of O, B, I, E, S; role is meaningful only
/// when prefix != 'O'. E and S are only valid under IOBES.
struct Tag {
  char prefix = 'O';
  Role role = Role::Cause;

  bool is_outside() const { return prefix == 'O'; }
  bool operator==(const Tag& other) const {
    return prefix == other.prefix && (is_outside() || role == other.role);
  }

  static Tag outside() { return Tag{}; }
};

/// "O", "B-C", "I-C", "E-C", "S-C", "B-E", "I-E", "E-E", "S-E"
std::string tag_to_string(const Tag& tag);
Tag tag_from_string(std::string_view text);

/// Canonical index of a tag within a scheme's alphabet. Order is
/// O, B-C, I-C, [E-C, S-C,] B-E, I-E [, E-E, S-E]; model heads and argmax
/// tie-breaking use this order.
int tag_index(const Tag& tag, Scheme scheme);
Tag tag_from_index(int index, Scheme scheme);

struct TagSequence {
  Scheme scheme = Scheme::Bio;
  std::vector<Tag> tags;
};

/// Encodes role-tagged spans over n_tokens tokens. Spans must be in bounds
/// and pairwise non-overlapping (exact duplicates are merged first); a tag
/// sequence cannot represent overlaps, so they raise ValidationError.
TagSequence encode_spans(const std::vector<RoleSpan>& spans, int n_tokens, Scheme scheme);

/// Encodes all relation spans of an example.
TagSequence encode(const Example& example, Scheme scheme);

enum class DecodeMode { Strict, Lenient };

/// Converts tags back to spans, sorted by start, pairwise non-overlapping.
/// Strict mode raises ValidationError on any transition outside the scheme
/// grammar. Lenient mode is total: a stray I or E opens a span, a role change
/// closes the previous span, and an unterminated IOBES span closes at the
/// last contiguous token. decode(encode(x)) == x in both modes.
std::vector<RoleSpan> decode(const TagSequence& sequence, DecodeMode mode);

}  // namespace causalspan
