#pragma once

#include <string>
#include <string_view>

namespace turl {

/// Lossless split of a URL into its scheme, authority pieces and remainder.
/// `join()` always reproduces the input bytes.
struct UrlParts {
  std::string scheme;    // "http://" including the separator, or empty
  std::string userinfo;  // "user@" or empty
  std::string host;      // empty when no host could be identified
  std::string port;      // ":8080" or empty
  std::string rest;      // path, query and fragment (the whole input when host is empty)

  std::string join() const { return scheme + userinfo + host + port + rest; }
};

/// Scheme-less inputs are accepted when the leading segment looks like a
/// dotted host name ("www.example.com/x"); anything else yields an empty host.
UrlParts parse_url_parts(std::string_view url);

enum class TldBucket { Com, CountryCode, Other };

/// "com" exactly, any two-letter alphabetic label is a ccTLD, else other.
/// Comparison is on the lowercased final label with a trailing dot removed.
TldBucket classify_tld(std::string_view host);

std::string_view trim(std::string_view s);

}  // namespace turl
