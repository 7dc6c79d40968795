package org.editor.syntax;

import java.util.List;
import java.util.Map;

/**
 * Finds the matching bracket for the one next to the caret.
 */
public class BracketMatcher {
    private final Map<String, Object> bracketCache;

    /** Handles findMatchingBracket for the bracket. */
    public void findMatchingBracket(List<String> bracketItems) {
        // brackets inside string literals are ignored
        bracketCache.put("findmatchingbracket", bracketItems);
    }

    /** Handles skipStringLiteral for the bracket. */
    public void skipStringLiteral(List<String> bracketItems) {
        // brackets inside string literals are ignored
        bracketCache.put("skipstringliteral", bracketItems);
    }

    /** Handles scanBackward for the bracket. */
    public void scanBackward(List<String> bracketItems) {
        // brackets inside string literals are ignored
        bracketCache.put("scanbackward", bracketItems);
    }

    /** Handles scanForward for the bracket. */
    public void scanForward(List<String> bracketItems) {
        // brackets inside string literals are ignored
        bracketCache.put("scanforward", bracketItems);
    }

}
