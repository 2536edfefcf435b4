#pragma once

// Minimal XML well-formedness checker: one root element, balanced and
// properly nested tags, quoted attributes, known entities only.

#include <cctype>
#include <string>
#include <vector>

namespace oracle {

inline bool xml_well_formed(const std::string& s, std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) {
            *why = msg;
        }
        return false;
    };
    std::vector<std::string> stack;
    bool seen_root = false;
    std::size_t i = 0;
    const std::size_t n = s.size();
    auto check_chars = [](const std::string& src, std::size_t from, std::size_t to) {
        const std::string& s = src;
        for (std::size_t k = from; k < to; ++k) {
            if (s[k] == '&') {
                const std::size_t semi = s.find(';', k);
                if (semi == std::string::npos || semi > to) {
                    return false;
                }
                const std::string ent = s.substr(k + 1, semi - k - 1);
                if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos") {
                    return false;
                }
                k = semi;
            } else if (s[k] == '<') {
                return false;
            }
        }
        return true;
    };
    auto check_text = [&](std::size_t from, std::size_t to) { return check_chars(s, from, to); };
    while (i < n) {
        const std::size_t lt = s.find('<', i);
        const std::size_t text_end = lt == std::string::npos ? n : lt;
        if (!check_text(i, text_end)) {
            return fail("bad character data near offset " + std::to_string(i));
        }
        if (stack.empty()) {
            for (std::size_t k = i; k < text_end; ++k) {
                if (!std::isspace(static_cast<unsigned char>(s[k]))) {
                    return fail("text outside the root element");
                }
            }
        }
        if (lt == std::string::npos) {
            break;
        }
        if (s.compare(lt, 5, "<?xml") == 0) {
            const std::size_t end = s.find("?>", lt);
            if (end == std::string::npos || seen_root || lt != s.find_first_not_of(" \t\r\n")) {
                return fail("misplaced XML declaration");
            }
            i = end + 2;
            continue;
        }
        if (s.compare(lt, 4, "<!--") == 0) {
            const std::size_t end = s.find("-->", lt);
            if (end == std::string::npos) {
                return fail("unterminated comment");
            }
            i = end + 3;
            continue;
        }
        const std::size_t gt = s.find('>', lt);
        if (gt == std::string::npos) {
            return fail("unterminated tag");
        }
        std::string tag = s.substr(lt + 1, gt - lt - 1);
        if (!tag.empty() && tag[0] == '/') {
            const std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) {
                return fail("mismatched closing tag </" + name + ">");
            }
            stack.pop_back();
            i = gt + 1;
            continue;
        }
        const bool self_closing = !tag.empty() && tag.back() == '/';
        if (self_closing) {
            tag.pop_back();
        }
        std::size_t k = 0;
        while (k < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[k])) || tag[k] == '_' || tag[k] == ':' ||
                                  tag[k] == '-' || tag[k] == '.')) {
            ++k;
        }
        const std::string name = tag.substr(0, k);
        if (name.empty()) {
            return fail("empty tag name");
        }
        // attributes: name="value"
        std::vector<std::string> attrs;
        while (k < tag.size()) {
            while (k < tag.size() && std::isspace(static_cast<unsigned char>(tag[k]))) {
                ++k;
            }
            if (k == tag.size()) {
                break;
            }
            const std::size_t a0 = k;
            while (k < tag.size() && tag[k] != '=' && !std::isspace(static_cast<unsigned char>(tag[k]))) {
                ++k;
            }
            const std::string attr = tag.substr(a0, k - a0);
            if (attr.empty() || k >= tag.size() || tag[k] != '=') {
                return fail("malformed attribute in <" + name + ">");
            }
            for (const auto& seen : attrs) {
                if (seen == attr) {
                    return fail("duplicate attribute " + attr);
                }
            }
            attrs.push_back(attr);
            ++k;
            if (k >= tag.size() || (tag[k] != '"' && tag[k] != '\'')) {
                return fail("unquoted attribute " + attr);
            }
            const char quote = tag[k];
            const std::size_t close = tag.find(quote, k + 1);
            if (close == std::string::npos) {
                return fail("unterminated attribute " + attr);
            }
            const std::string value = tag.substr(k + 1, close - k - 1);
            if (!check_chars(value, 0, value.size())) {
                return fail("bad attribute value");
            }
            k = close + 1;
        }
        if (stack.empty()) {
            if (seen_root) {
                return fail("more than one root element");
            }
            seen_root = true;
        }
        if (!self_closing) {
            stack.push_back(name);
        }
        i = gt + 1;
    }
    if (!stack.empty()) {
        return fail("unclosed element <" + stack.back() + ">");
    }
    if (!seen_root) {
        return fail("no root element");
    }
    return true;
}

}  // namespace oracle
