from .bleu import bleu, corpus_bleu
from .brevity import brevity_penalty
from .cider import IdfTable, build_idf, cider, cider_sentence
from .ngrams import ngram_profile
from .rouge import rouge_l, rouge_l_multi, rouge_l_prf
