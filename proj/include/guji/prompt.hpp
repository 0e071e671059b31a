#pragma once

namespace guji {

// Default classification prompt appended after [SEP]; the label is generated
// as its continuation ("the category of this sentence is").
inline constexpr const char* kClassTemplatePrefix = "这个句子的类别是";

} // namespace guji
