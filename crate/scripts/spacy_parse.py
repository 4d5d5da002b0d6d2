"""External parser for `grammargate --parser-cmd`.

Reads one sentence per line on stdin and writes one CoNLL-U block per line
to stdout, using spaCy's English pipeline.

    pip install spacy en-core-web-sm
    grammargate validate --stdin --parser-cmd "python3 scripts/spacy_parse.py"
"""
import sys

import spacy


def main():
    model = sys.argv[1] if len(sys.argv) > 1 else "en_core_web_sm"
    nlp = spacy.load(model, disable=["ner"])
    lines = [line.rstrip("\n") for line in sys.stdin]
    out = sys.stdout
    for doc, text in zip(nlp.pipe(lines), lines):
        out.write("# text = %s\n" % text)
        tokens = [t for t in doc if not t.is_space]
        index = {t.i: n for n, t in enumerate(tokens, start=1)}
        root = None
        for n, t in enumerate(tokens, start=1):
            head = 0 if t.head.i == t.i else index.get(t.head.i, 0)
            rel = "root" if head == 0 else (t.dep_ or "dep")
            if head == 0:
                # one root per block: later sentence roots hang off the first
                if root is None:
                    root = n
                else:
                    head, rel = root, "parataxis"
            out.write("%d\t%s\t%s\t%s\t%s\t_\t%d\t%s\t_\t_\n" % (
                n, t.text, t.lemma_ or "_", t.pos_ or "_", t.tag_ or "_", head, rel))
        out.write("\n")
    out.flush()


if __name__ == "__main__":
    main()
