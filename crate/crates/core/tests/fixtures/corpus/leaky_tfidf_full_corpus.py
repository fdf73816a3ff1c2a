# expect: preprocessing
import pandas as pd
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.model_selection import train_test_split
from sklearn.naive_bayes import MultinomialNB
from sklearn.metrics import f1_score

reviews = pd.read_csv("reviews.csv")
vec = TfidfVectorizer(min_df=2)
X = vec.fit_transform(reviews["text"])
y = reviews["label"]
X_train, X_test, y_train, y_test = train_test_split(X, y, stratify=y)
nb = MultinomialNB()
nb.fit(X_train, y_train)
print(f1_score(y_test, nb.predict(X_test)))
