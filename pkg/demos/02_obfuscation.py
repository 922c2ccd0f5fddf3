"""Walkthrough: identifier obfuscation and the mask/label alignment.

Obfuscates the classic binary-tree listing (class + recursive traversal),
prints the placeholder map, restores the original byte-for-byte, and shows
how a multi-subword identifier expands into aligned [MASK] positions for
encoder-only deobfuscation training.

Run: python3 demos/02_obfuscation.py
"""

from sageforge.obfuscator import build_mask_map, deobfuscate, obfuscate
from sageforge.tokenizer import default_specials, train_bpe

LISTING = '''class Node:
  def __init__(self, v):
    self.data = v
    self.left = None
    self.right = None

# Function to print postorder traversal
def printPostorder(node):
  if node == None:
    return

  # First recur on the left subtree
  printPostorder(node.left)

  # Then recur on the right subtree
  printPostorder(node.right)

  # Now deal with the node
  print(node.data, end=' ')
'''

print("=" * 60)
print("original")
print("=" * 60)
print(LISTING)

result = obfuscate(LISTING)
print("=" * 60)
print("obfuscated (comments untouched, print left intact)")
print("=" * 60)
print(result.obfuscated_text)

print("identifier map:")
for placeholder, original in result.identifier_map.items():
    print(f"  {placeholder:>4} -> {original}")

restored = deobfuscate(result)
print(f"\nround trip byte-exact: {restored == LISTING}\n")

print("=" * 60)
print("mask map: placeholders expand to aligned [MASK] runs")
print("=" * 60)
tokenizer = train_bpe([LISTING] * 4 + ["printPostorder"] * 8, vocab_size=640,
                      specials=default_specials(16))
example = build_mask_map(result, tokenizer)
print(f"{example.placeholder_count} placeholder occurrences expanded")
print(f"{len(example.label_map)} mask positions with labels")

runs: list[list[tuple[int, int]]] = []
for pos, label in example.label_map:
    if runs and runs[-1][-1][0] == pos - 1:
        runs[-1].append((pos, label))
    else:
        runs.append([(pos, label)])
print("\nfirst five mask runs (mask count -> identifier subwords):")
for run in runs[:5]:
    labels = [label for _, label in run]
    rendered = [tokenizer.decode([l]) for l in labels]
    print(f"  {len(run)} x [MASK] -> {rendered} = {tokenizer.decode(labels)!r}")

substituted = list(example.input_token_ids)
for pos, label in example.label_map:
    substituted[pos] = label
print(f"\nsubstituting labels back reproduces the original: "
      f"{tokenizer.decode(substituted) == LISTING}")
