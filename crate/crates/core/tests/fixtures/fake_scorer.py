"""Line-protocol scorer for tests.

Answers {"id":N,"text":T} with {"id":N,"score":S} where S is
(len(T) % 10) / 10 unless a mode says otherwise.

usage: fake_scorer.py [ok|clamp|drop7|noid|nan|dup|garbage|hang|crash|half|reverse]
"""
import json
import sys

mode = sys.argv[1] if len(sys.argv) > 1 else "ok"


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


pending = []
while True:
    line = sys.stdin.readline()
    if not line:
        break
    req = json.loads(line)
    rid, text = req["id"], req["text"]
    score = (len(text) % 10) / 10
    if mode == "hang":
        continue
    if mode == "crash":
        sys.exit(3)
    if mode == "clamp" and rid % 10 == 3:
        score = 1.7
    if mode == "drop7" and rid % 10 == 7:
        continue
    if mode == "noid":
        emit({"score": score})
        continue
    if mode == "nan" and rid % 10 == 2:
        sys.stdout.write('{"id": %d, "score": NaN}\n' % rid)
        sys.stdout.flush()
        continue
    if mode == "garbage" and rid % 10 == 5:
        sys.stdout.write("this is not json\n")
        sys.stdout.flush()
        continue
    if mode == "half" and rid % 10 == 6:
        sys.exit(0)
    if mode == "reverse":
        pending.append({"id": rid, "score": score})
        if len(pending) == 2:
            for obj in reversed(pending):
                emit(obj)
            pending = []
        continue
    emit({"id": rid, "score": score})
    if mode == "dup" and rid % 10 == 1:
        emit({"id": rid, "score": score})
for obj in pending:
    emit(obj)
